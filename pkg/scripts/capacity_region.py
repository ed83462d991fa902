"""Map the (n_AB, n_BA) plane for each n: feasible specs are built and run on every input."""
from __future__ import annotations

import argparse
from dataclasses import dataclass

from qcomm.coding import CapacitySpec, InfeasibleSpec, build_capacity_protocol
from qcomm.protovm import all_inputs, execute


@dataclass
class RegionConfig:
    max_n: int = 6


def region(n: int) -> list[str]:
    """One text row per n_BA (top row largest); '#' built and exact, '.' rejected."""
    rows = []
    for n_ba in range(n, -1, -1):
        cells = []
        for n_ab in range(n + 1):
            try:
                prog = build_capacity_protocol(CapacitySpec(n, n_ab, n_ba))
            except InfeasibleSpec:
                cells.append(".")
                continue
            ok = all(execute(prog, x).probability_of(x) > 1 - 1e-9 for x in all_inputs(n))
            cells.append("#" if ok else "!")
        rows.append(f"n_BA={n_ba:<2d} " + " ".join(cells))
    rows.append("       " + " ".join(str(a % 10) for a in range(n + 1)) + "  <- n_AB")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-n", type=int, default=RegionConfig.max_n)
    cfg = RegionConfig(p.parse_args(argv).max_n)
    for n in range(1, cfg.max_n + 1):
        print(f"n = {n}")
        print("\n".join(region(n)))
        print()


if __name__ == "__main__":
    main()
