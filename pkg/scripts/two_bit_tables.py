"""Success tables of the two-bit protocols next to the best deterministic classical protocol."""
from __future__ import annotations

from qcomm.epr2bit import (
    INPUTS2,
    build_entangled_2bit,
    build_qubit_2bit,
    build_three_bit_classical,
    enumerate_classical_2bit,
    ip2,
    pi_distribution,
)
from qcomm.protovm import bitstr, success_report


def table(rep) -> str:
    head = "x\\y  " + "  ".join(bitstr(y).rjust(6) for y in INPUTS2)
    lines = [head]
    for x in INPUTS2:
        lines.append(bitstr(x).ljust(5) + "  ".join(f"{rep.per_pair[(x, y)]:6.4f}" for y in INPUTS2))
    return "\n".join(lines)


def main():
    for prog in (build_entangled_2bit(), build_qubit_2bit(), build_three_bit_classical()):
        rep = success_report(prog, ip2)
        print(f"{prog.name}: min {rep.minimum:.12g}, mean {rep.mean:.12g}")
        print(table(rep))
        print()
    res = enumerate_classical_2bit(pi_distribution())
    print(f"best deterministic 2-bit tree under pi: {res.max_success} over {res.trees} trees")
    print(f"witness: {res.argmax}")
    rec = enumerate_classical_2bit(pi_distribution(), output_mode="receiver")
    print(f"if the receiver may also use its own input: {rec.max_success}")


if __name__ == "__main__":
    main()
