"""Write entropy / Holevo chi traces of the built-in qubit protocols as CSV files."""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from qcomm.acceptance import builtin_qubit_protocols
from qcomm.infobounds import check_program


@dataclass
class TraceConfig:
    max_n: int = 3
    outdir: Path = Path("chi_traces")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-n", type=int, default=TraceConfig.max_n)
    p.add_argument("--outdir", type=Path, default=TraceConfig.outdir)
    a = p.parse_args(argv)
    cfg = TraceConfig(a.max_n, a.outdir)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    for prog in builtin_qubit_protocols(cfg.max_n):
        trace, verdict = check_program(prog)
        with open(cfg.outdir / f"{prog.name}.csv", "w") as fh:
            trace.to_csv(fh)
        flag = "ok" if verdict.ok else "VIOLATION"
        print(f"{prog.name:32s} final chi {trace.final_chi:8.5f}  bound {verdict.chi_bound}  "
              f"I(X:Y) {trace.mutual_info:8.5f}  {flag}")


if __name__ == "__main__":
    main()
