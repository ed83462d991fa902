"""Reduction attack on noisy exact IP protocols: recovery, distance and information per (theta, n)."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from math import sin

import numpy as np

from qcomm.infobounds import mutual_information
from qcomm.ipproto import (
    attack_joint_distribution,
    build_noisy_exact_ip,
    epsilon_of,
    fano_bound,
    make_clean,
    reduction_attack,
)
from qcomm.protovm import all_inputs


@dataclass
class SweepConfig:
    thetas: tuple[float, ...] = tuple(np.round(np.arange(0.05, 0.46, 0.05), 2))
    max_n: int = 4
    info_max_n: int = 3


def sweep(cfg: SweepConfig):
    for theta in cfg.thetas:
        for n in range(1, cfg.max_n + 1):
            prog = build_noisy_exact_ip(n, theta)
            clean = make_clean(prog)
            reps = [reduction_attack(clean, x) for x in all_inputs(n)]
            eps = epsilon_of(prog).epsilon
            row = {
                "theta": theta,
                "n": n,
                "epsilon": eps,
                "min_recovery": min(r.probability for r in reps),
                "recovery_bound": (1 - 2 * eps) ** 2,
                "max_gap": max(r.euclidean_gap for r in reps),
                "gap_bound": 2 * sin(theta),
                "mutual_info": "",
                "fano_bound": fano_bound(eps, n),
            }
            if n <= cfg.info_max_n:
                row["mutual_info"] = mutual_information(attack_joint_distribution(clean, n))
            yield row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--out", help="CSV path (default: stdout)")
    args = p.parse_args(argv)
    cfg = SweepConfig(max_n=args.max_n)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = None
    for row in sweep(cfg):
        if w is None:
            w = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            w.writeheader()
        w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in row.items()})
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
