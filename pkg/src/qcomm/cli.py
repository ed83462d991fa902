"""Command-line entry point: ``qcomm <command> [options]``.

Commands: run, sweep, verify, enumerate-classical, capacity, chi-trace.
Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version
from typing import Callable

import numpy as np

from . import acceptance
from .coding import CapacitySpec, InfeasibleSpec, build_capacity_protocol, build_superdense
from .epr2bit import MATRIX_PROVENANCE, build_entangled_2bit, build_qubit_2bit, enumerate_classical_2bit, ip2, pi_distribution
from .infobounds import check_program
from .ipproto import build_classical_ip, build_exact_ip, build_noisy_exact_ip, ip, make_clean
from .protovm import ProtocolError, ProtocolProgram, as_bits, bitstr, execute, loads, success_report

REPORT_SCHEMA = 1


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0.1.0"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Entry:
    build: Callable[[argparse.Namespace], ProtocolProgram]
    target: Callable
    needs_n: bool = True


def _identity(x, y):
    return x


def _clean_target(x, y):
    # Bob's inputs are (z, y); the answer qubit ends as z XOR IP(x, y)
    return (y[0] + ip(x, y[1:])) & 1


REGISTRY: dict[str, Entry] = {
    "exact-ip": Entry(lambda a: build_exact_ip(a.n), ip),
    "noisy-ip": Entry(lambda a: build_noisy_exact_ip(a.n, a.theta), ip),
    "clean-ip": Entry(lambda a: make_clean(build_exact_ip(a.n)), _clean_target),
    "classical-ip": Entry(lambda a: build_classical_ip(a.n, a.flip), ip),
    "superdense": Entry(lambda a: build_superdense(a.n), _identity),
    "capacity": Entry(lambda a: build_capacity_protocol(CapacitySpec(a.n, a.n_ab, a.n_ba)), _identity),
    "epr-2bit": Entry(lambda a: build_entangled_2bit(), ip2, needs_n=False),
    "qubit-2bit": Entry(lambda a: build_qubit_2bit(), ip2, needs_n=False),
}


def _target_for(program: ProtocolProgram) -> Callable:
    """Target function for a protocol loaded from JSON: IP, or identity when Bob has no input."""
    if program.n_bob_input_bits == 0:
        return _identity
    if program.n_alice_input_bits == program.n_bob_input_bits:
        return ip
    if program.n_bob_input_bits == program.n_alice_input_bits + 1:
        return _clean_target
    raise UsageError("cannot infer a target function for this protocol's input sizes")


def resolve(args) -> tuple[ProtocolProgram, Callable]:
    if getattr(args, "protocol_file", None):
        try:
            with open(args.protocol_file) as fh:
                prog = loads(fh.read())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot load protocol file: {exc}") from exc
        return prog, _target_for(prog)
    name = args.protocol
    if name is None:
        raise UsageError("give a protocol name or --protocol-file")
    if name not in REGISTRY:
        raise UsageError(f"unknown protocol {name!r}; known: {', '.join(sorted(REGISTRY))}")
    entry = REGISTRY[name]
    if entry.needs_n and args.n is None:
        raise UsageError(f"protocol {name!r} needs --n")
    try:
        return entry.build(args), entry.target
    except (ValueError, InfeasibleSpec) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# deterministic formatting


def fmt_float(v: float) -> str:
    v = float(v)
    if v == 0:
        v = 0.0  # no negative zero
    return format(v, ".12g")


def jsonable(obj):
    """Convert to plain JSON types; floats become 12-significant-digit numbers, rationals "num/den"."""
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt_float(obj))
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else _key(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _key(k: tuple) -> str:
    if all(isinstance(b, (int, np.integer)) for b in k):
        return bitstr(k)
    return ",".join(_key(p) if isinstance(p, tuple) else str(p) for p in k)


def dump_json(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False) + "\n"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(args, kind: str) -> dict:
    return {"schema": REPORT_SCHEMA, "kind": kind, "tool_version": tool_version(),
            "tolerance": args.tolerance}


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    prog, target = resolve(args)
    try:
        x = as_bits(args.x or "", prog.n_alice_input_bits)
        y = as_bits(args.y or "", prog.n_bob_input_bits)
    except ValueError as exc:
        raise UsageError(f"malformed input bits: {exc}") from exc
    out = execute(prog, x, y)
    t = target(x, y)
    t = (t,) if isinstance(t, int) else tuple(t)
    success = out.probability_of(t)
    dist = {bitstr(k): v for k, v in sorted(out.output_distribution.items()) if v > args.tolerance * 1e-3}
    report = _header(args, "run") | {
        "protocol": prog.name,
        "x": bitstr(x),
        "y": bitstr(y),
        "expected_output": bitstr(t),
        "success": success,
        "output_distribution": dist,
        "ledger": out.ledger.as_dict(),
    }
    if prog.name.startswith(("epr-2bit", "qubit-2bit")):
        report["matrix_provenance"] = MATRIX_PROVENANCE
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["output", "probability"])
        for k, v in dist.items():
            w.writerow([k, fmt_float(v)])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(dump_json(report), args.out)
    return 0


def cmd_sweep(args) -> int:
    prog, target = resolve(args)
    rep = success_report(prog, target, jobs=args.jobs)
    rows = [(bitstr(x), bitstr(y), rep.per_pair[(x, y)]) for x, y in sorted(rep.per_pair)]
    if args.format == "json":
        report = _header(args, "sweep") | {
            "protocol": prog.name,
            "rows": [{"x": x, "y": y, "success": p} for x, y, p in rows],
            "min": rep.minimum,
            "mean": rep.mean,
            "ledger": execute(prog, *next(iter(rep.per_pair))).ledger.as_dict(),
        }
        _emit(dump_json(report), args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "success"])
        for x, y, p in rows:
            w.writerow([x, y, fmt_float(p)])
        w.writerow(["#min", "", fmt_float(rep.minimum)])
        w.writerow(["#mean", "", fmt_float(rep.mean)])
        _emit(buf.getvalue(), args.out)
    return 0


def cmd_verify(args) -> int:
    if args.suite not in acceptance.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(acceptance.SUITES)}")
    results = acceptance.run_suite(args.suite)
    for r in results:
        print(r.line(), file=sys.stderr)
    report = _header(args, "verify") | {
        "suite": args.suite,
        "passed": all(r.passed for r in results),
        "checks": [{"criterion": r.id, "name": r.name, "passed": r.passed, "measured": r.measured,
                    "required": r.required, "failures": r.failures} for r in results],
        "matrix_provenance": MATRIX_PROVENANCE,
    }
    if not args.timings:
        for c in report["checks"]:
            c["measured"].pop("runtime_s", None)
    _emit(dump_json(report), args.out)
    return 0 if report["passed"] else 1


def cmd_enumerate(args) -> int:
    res = enumerate_classical_2bit(pi_distribution(), output_mode=args.mode)
    report = _header(args, "enumerate-classical") | {
        "distribution": "uniform on x != 00, y != 00",
        "output_mode": res.output_mode,
        "trees": res.trees,
        "max_success": res.max_success,
        "witness": {
            "first_speaker": res.argmax.first_speaker,
            "first_message": res.argmax.first_message,
            "second_speaker": list(res.argmax.second_speaker),
            "second_message": list(res.argmax.second_message),
            "output": res.argmax.output,
        },
    }
    _emit(dump_json(report), args.out)
    return 0


def cmd_capacity(args) -> int:
    if args.n is None or args.n_ab is None or args.n_ba is None:
        raise UsageError("capacity needs --n, --n-ab and --n-ba")
    try:
        spec = CapacitySpec(args.n, args.n_ab, args.n_ba)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = _header(args, "capacity") | {"n": spec.n, "n_AB": spec.n_AB, "n_BA": spec.n_BA,
                                          "feasible": spec.feasible, "violations": spec.violations()}
    if spec.feasible:
        prog = build_capacity_protocol(spec)
        rep = success_report(prog, _identity, jobs=args.jobs)
        report["min_success"] = rep.minimum
        report["ledger"] = execute(prog, (0,) * spec.n, ()).ledger.as_dict()
    _emit(dump_json(report), args.out)
    return 0


def cmd_chi_trace(args) -> int:
    prog, _ = resolve(args)
    try:
        y = as_bits(args.y or "0" * prog.n_bob_input_bits, prog.n_bob_input_bits)
    except ValueError as exc:
        raise UsageError(f"malformed input bits: {exc}") from exc
    try:
        trace, verdict = check_program(prog, y)
    except ProtocolError as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "csv":
        buf = io.StringIO()
        trace.to_csv(buf)
        _emit(buf.getvalue(), args.out)
    else:
        report = _header(args, "chi-trace") | {
            "protocol": prog.name,
            "y": bitstr(y),
            "records": [{"step": r.step, "kind": r.kind, "S": r.S, "chi": r.chi} for r in trace.records],
            "final_chi": trace.final_chi,
            "chi_bound": verdict.chi_bound,
            "mutual_info": trace.mutual_info,
            "violations": verdict.violations,
        }
        _emit(dump_json(report), args.out)
    return 0 if verdict.ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcomm", description="Quantum communication complexity toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, protocol=True):
        if protocol:
            sp.add_argument("protocol", nargs="?", help=f"one of: {', '.join(sorted(REGISTRY))}")
            sp.add_argument("--protocol-file", help="protocol program as JSON")
            sp.add_argument("--theta", type=float, default=0.2, help="rotation angle for noisy-ip")
            sp.add_argument("--flip", type=float, default=0.0, help="answer flip probability for classical-ip")
            sp.add_argument("--n-ab", dest="n_ab", type=int)
            sp.add_argument("--n-ba", dest="n_ba", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--tolerance", type=float, default=acceptance.TOL)
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("run", help="execute a protocol on one input pair")
    common(sp)
    sp.add_argument("--x")
    sp.add_argument("--y")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="exact success on every input pair")
    common(sp)
    sp.set_defaults(func=cmd_sweep, format="csv")

    sp = sub.add_parser("verify", help="run acceptance checks")
    sp.add_argument("suite", help=f"one of: {', '.join(acceptance.SUITES)}")
    sp.add_argument("--timings", action="store_true", help="include wall-clock times (not reproducible)")
    common(sp, protocol=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("enumerate-classical", help="best deterministic 2-bit protocol under the hard distribution")
    sp.add_argument("--mode", choices=("transcript", "receiver"), default="transcript")
    common(sp, protocol=False)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("capacity", help="check and run a capacity spec (n, n_AB, n_BA)")
    common(sp, protocol=False)
    sp.add_argument("--n-ab", dest="n_ab", type=int)
    sp.add_argument("--n-ba", dest="n_ba", type=int)
    sp.set_defaults(func=cmd_capacity)

    sp = sub.add_parser("chi-trace", help="entropy and Holevo chi of Bob's qubits step by step")
    common(sp)
    sp.add_argument("--y")
    sp.set_defaults(func=cmd_chi_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
