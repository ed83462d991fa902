"""Acceptance checks, shared by the test suite and ``qcomm verify``.

Each check returns a :class:`CheckResult` carrying the measured values,
the required values and the tolerance in force, so a report can be read
without rerunning anything.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, sin
from typing import Callable

import numpy as np

from .coding import CapacitySpec, InfeasibleSpec, build_capacity_protocol, build_superdense, teleport_simulate
from .epr2bit import build_entangled_2bit, build_qubit_2bit, enumerate_classical_2bit, ip2, pi_distribution
from .infobounds import assert_step_bounds, chi_trace, mutual_information
from .ipproto import (
    attack_joint_distribution,
    build_classical_ip,
    build_exact_ip,
    build_noisy_exact_ip,
    clean_residual,
    epsilon_of,
    fano_bound,
    interleave_to_qubits,
    ip,
    make_clean,
    reduction_attack,
)
from .protovm import ProtocolProgram, all_inputs, execute, success_report

TOL = 1e-9
INFO_TOL = 1e-7
THETAS = tuple(round(0.05 * k, 2) for k in range(1, 10))


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    measured: dict
    required: dict
    seconds: float = 0.0
    failures: list = field(default_factory=list)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.id:2d} {self.name} ({self.seconds:.2f} s)"


def _timed(fn: Callable[[], CheckResult]) -> CheckResult:
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    limit = res.required.get("runtime_s")
    res.measured["runtime_s"] = round(res.seconds, 3)
    if limit is not None and res.seconds >= limit:
        res.passed = False
        res.failures.append(f"runtime {res.seconds:.1f} s exceeds {limit} s")
    return res


# ---------------------------------------------------------------------------


def _exact_ip() -> CheckResult:
    rng = np.random.default_rng(20240)
    fails, worst, ledgers = [], 1.0, {}
    for n in range(1, 9):
        prog = build_exact_ip(n)
        if n <= 5:
            pairs = [(x, y) for x in all_inputs(n) for y in all_inputs(n)]
        else:
            pairs = [(tuple(int(b) for b in rng.integers(0, 2, n)), tuple(int(b) for b in rng.integers(0, 2, n)))
                     for _ in range(1000)]
        for x, y in pairs:
            out = execute(prog, x, y)
            p = out.probability_of(ip(x, y))
            worst = min(worst, p)
            if p < 1 - TOL:
                fails.append(f"n={n} x={x} y={y}: success {p}")
        led = out.ledger
        ledgers[n] = (led.n_AB, led.n_BA)
        if (led.n_AB, led.n_BA) != (ceil(n / 2), 0):
            fails.append(f"n={n}: ledger {(led.n_AB, led.n_BA)}")
    return CheckResult(1, "exact IP protocol", not fails,
                       {"min_success": worst, "ledger": {str(k): list(v) for k, v in ledgers.items()}},
                       {"min_success": 1.0, "tolerance": TOL, "n_AB": "ceil(n/2)", "n_BA": 0, "runtime_s": 30},
                       failures=fails[:20])


def _clean_form() -> CheckResult:
    fails, worst = [], 0.0
    for n in range(1, 5):
        clean = make_clean(build_exact_ip(n))
        for x in all_inputs(n):
            for y in all_inputs(n):
                for z in (0, 1):
                    d, owners_ok = clean_residual(clean, x, y, z)
                    worst = max(worst, d)
                    if d > TOL or not owners_ok:
                        fails.append(f"n={n} x={x} y={y} z={z}: residual {d:.3g}, owners restored {owners_ok}")
    return CheckResult(2, "clean form", not fails, {"max_residual": worst},
                       {"max_residual": 0.0, "tolerance": TOL, "runtime_s": 30}, failures=fails[:20])


def _attack_exact() -> CheckResult:
    fails, worst = [], 1.0
    for n in range(1, 7):
        clean = make_clean(build_exact_ip(n))
        for x in all_inputs(n):
            p = reduction_attack(clean, x).probability
            worst = min(worst, p)
            if abs(p - 1) > TOL:
                fails.append(f"n={n} x={x}: recovery {p}")
    return CheckResult(3, "reduction attack, exact", not fails, {"min_recovery": worst},
                       {"recovery": 1.0, "tolerance": TOL}, failures=fails[:20])


def _attack_noisy() -> CheckResult:
    fails, rows = [], []
    for theta in THETAS:
        eps = sin(theta) ** 2
        for n in range(1, 5):
            clean = make_clean(build_noisy_exact_ip(n, theta))
            pmin, gmax = 1.0, 0.0
            for x in all_inputs(n):
                rep = reduction_attack(clean, x)
                pmin, gmax = min(pmin, rep.probability), max(gmax, rep.euclidean_gap)
            need_p, need_g = (1 - 2 * eps) ** 2, 2 * sin(theta)
            rows.append({"theta": theta, "n": n, "min_recovery": pmin, "required_recovery": need_p,
                         "max_gap": gmax, "allowed_gap": need_g})
            if pmin < need_p - TOL or gmax > need_g + TOL:
                fails.append(f"theta={theta} n={n}: recovery {pmin:.6g} vs {need_p:.6g}, gap {gmax:.6g} vs {need_g:.6g}")
    return CheckResult(4, "reduction attack, noisy", not fails, {"table": rows},
                       {"recovery": ">= (1 - 2 sin^2 theta)^2", "gap": "<= 2 sin theta", "tolerance": TOL},
                       failures=fails)


def _two_bit_protocols() -> CheckResult:
    fails = []
    ent_prog, qub_prog = build_entangled_2bit(), build_qubit_2bit()
    ent, qub = success_report(ent_prog, ip2), success_report(qub_prog, ip2)
    gap = max(abs(ent.per_pair[k] - qub.per_pair[k]) for k in ent.per_pair)
    for rep in (ent, qub):
        if rep.minimum < 0.8 - TOL:
            fails.append(f"{rep.program}: min success {rep.minimum}")
    if gap > TOL:
        fails.append(f"tables differ by {gap:.3g}")
    comm = {}
    for prog, want in ((ent_prog, {"bits": 2, "qubits": 0}), (qub_prog, {"bits": 0, "qubits": 2})):
        seen = set()
        for x in all_inputs(2):
            for y in all_inputs(2):
                for c in execute(prog, x, y).ledger.per_branch:
                    seen.add((c["bits_AB"] + c["bits_BA"], c["n_AB"] + c["n_BA"]))
        comm[prog.name] = sorted(seen)
        if seen != {(want["bits"], want["qubits"])}:
            fails.append(f"{prog.name}: per-branch (bits, qubits) {sorted(seen)}")
    return CheckResult(5, "two-bit quantum protocols", not fails,
                       {"entangled_min": ent.minimum, "qubit_min": qub.minimum, "table_gap": gap,
                        "per_branch_bits_qubits": comm},
                       {"min_success": "4/5", "table_gap": 0.0, "tolerance": TOL,
                        "per_branch_bits_qubits": {ent_prog.name: [[2, 0]], qub_prog.name: [[0, 2]]}},
                       failures=fails)


def _classical_bound() -> CheckResult:
    res = enumerate_classical_2bit(pi_distribution())
    ok = res.max_success == Fraction(7, 9)
    return CheckResult(6, "classical two-bit bound", ok,
                       {"max_success": res.max_success, "trees": res.trees, "witness_tree": res.argmax.tree_id},
                       {"max_success": Fraction(7, 9), "tolerance": 0, "runtime_s": 60},
                       failures=[] if ok else [f"max success {res.max_success}"])


def _capacity() -> CheckResult:
    fails, counts = [], {"feasible": 0, "infeasible": 0}
    for n in range(1, 7):
        for n_ab in range(n + 1):
            for n_ba in range(n + 1):
                spec = CapacitySpec(n, n_ab, n_ba)
                expected = n_ab >= ceil(n / 2) and n_ab + n_ba >= n
                try:
                    prog = build_capacity_protocol(spec)
                except InfeasibleSpec:
                    counts["infeasible"] += 1
                    if expected:
                        fails.append(f"{spec}: rejected but feasible")
                    continue
                counts["feasible"] += 1
                if not expected:
                    fails.append(f"{spec}: built but infeasible")
                    continue
                for x in all_inputs(n):
                    out = execute(prog, x, ())
                    if out.probability_of(x) < 1 - TOL:
                        fails.append(f"{spec} x={x}: success {out.probability_of(x)}")
                        break
                    if (out.ledger.n_AB, out.ledger.n_BA) != (n_ab, n_ba) or out.ledger.prior_epr:
                        fails.append(f"{spec}: ledger {out.ledger.as_dict()}")
                        break
    return CheckResult(7, "capacity region", not fails, counts,
                       {"region": "n_AB >= ceil(n/2) and n_AB + n_BA >= n", "tolerance": TOL, "runtime_s": 60},
                       failures=fails)


def builtin_qubit_protocols(max_n: int = 4) -> list[ProtocolProgram]:
    """Measurement-free built-in protocols with at most ``max_n`` input bits per party."""
    progs: list[ProtocolProgram] = []
    for n in range(1, max_n + 1):
        progs += [build_superdense(n), build_exact_ip(n), build_noisy_exact_ip(n, 0.2)]
        for n_ab in range(ceil(n / 2), n + 1):
            for n_ba in range(n - n_ab, n + 1):
                progs.append(build_capacity_protocol(CapacitySpec(n, n_ab, n_ba)))
    for n in range(1, max_n):
        progs.append(make_clean(build_exact_ip(n)))
    return progs


def _holevo() -> CheckResult:
    fails, final = [], {}
    for prog in builtin_qubit_protocols(4):
        ys = {(0,) * prog.n_bob_input_bits, (1,) * prog.n_bob_input_bits}
        for y in sorted(ys):
            trace = chi_trace(prog, None, y)
            ledger = execute(prog, (0,) * prog.n_alice_input_bits, y).ledger
            verdict = assert_step_bounds(trace, ledger, INFO_TOL, TOL)
            fails += [f"{prog.name} y={y}: {v}" for v in verdict.violations]
        final[prog.name] = trace.final_chi
        if prog.name.startswith("superdense-"):
            n = prog.n_alice_input_bits
            target = min(2 * ledger.n_AB, n)
            if abs(trace.final_chi - target) > INFO_TOL:
                fails.append(f"{prog.name}: final chi {trace.final_chi:.9g}, expected {target}")
    sat = {k: v for k, v in final.items() if k.startswith("superdense-")}
    return CheckResult(8, "Holevo accounting", not fails, {"protocols": len(final), "superdense_final_chi": sat},
                       {"per_step": "dchi <= 2 (A->B), <= 0 otherwise; dS <= 1 per send; unitaries invariant",
                        "superdense_final_chi": "2 n_AB (even n); n (odd n, the entropy of x)",
                        "tolerance": INFO_TOL, "unitary_tolerance": TOL},
                       failures=fails[:20])


def _interleaving() -> CheckResult:
    fails = []
    q = interleave_to_qubits(build_classical_ip(1))
    rep = success_report(q, ip)
    if rep.minimum < 1 - TOL or len(rep.per_pair) != 16:
        fails.append(f"interleaved IP_1: min success {rep.minimum} over {len(rep.per_pair)} pairs")
    led = execute(q, (0, 0), (0, 0)).ledger
    if (led.qubits, led.bits) != (1, 0):
        fails.append(f"interleaved IP_1 uses {led.qubits} qubits and {led.bits} bits")
    errs = {}
    for eps in (0.1, 0.2):
        prof = epsilon_of(interleave_to_qubits(build_classical_ip(1, eps)))
        errs[eps] = prof.epsilon
        want = 2 * eps * (1 - eps)
        dev = max(abs(v - want) for v in prof.per_pair.values())
        if dev > TOL:
            fails.append(f"eps={eps}: composed error deviates from {want} by {dev:.3g}")
    return CheckResult(9, "interleaving", not fails,
                       {"min_success": rep.minimum, "qubits": led.qubits, "composed_error": errs},
                       {"min_success": 1.0, "qubits": 1, "composed_error": "2 eps (1 - eps)", "tolerance": TOL},
                       failures=fails)


def teleport_candidates() -> list[ProtocolProgram]:
    progs = [build_superdense(n) for n in range(1, 5)] + [build_exact_ip(n) for n in range(1, 4)]
    progs += [build_noisy_exact_ip(2, 0.3), build_capacity_protocol(CapacitySpec(3, 2, 1)),
              build_capacity_protocol(CapacitySpec(4, 2, 3)), make_clean(build_exact_ip(2)),
              build_qubit_2bit(), interleave_to_qubits(build_classical_ip(1))]
    return progs


def _teleportation() -> CheckResult:
    fails, worst = [], 0.0
    for prog in teleport_candidates():
        tp = teleport_simulate(prog)
        for x in all_inputs(prog.n_alice_input_bits):
            for y in all_inputs(prog.n_bob_input_bits):
                a, b = execute(prog, x, y), execute(tp, x, y)
                keys = set(a.output_distribution) | set(b.output_distribution)
                d = max(abs(a.output_distribution.get(k, 0.0) - b.output_distribution.get(k, 0.0)) for k in keys)
                worst = max(worst, d)
                if d > TOL:
                    fails.append(f"{prog.name} x={x} y={y}: distributions differ by {d:.3g}")
                la, lb = a.ledger, b.ledger
                want = (0, 0, la.bits_AB + 2 * la.n_AB, la.bits_BA + 2 * la.n_BA)
                if (lb.n_AB, lb.n_BA, lb.bits_AB, lb.bits_BA) != want:
                    fails.append(f"{prog.name}: teleported ledger {lb.as_dict()} vs original {la.as_dict()}")
    return CheckResult(10, "teleportation simulation", not fails,
                       {"protocols": len(teleport_candidates()), "max_distribution_gap": worst},
                       {"max_distribution_gap": 0.0, "bits": "2 x qubits", "tolerance": TOL},
                       failures=fails[:20])


def _fano() -> CheckResult:
    fails = []
    grid_min = np.inf
    for k in range(500):
        eps = k / 1000
        for n in range(1, 9):
            slack = fano_bound(eps, n) - ((1 - 2 * eps) ** 2 * n - 1)
            grid_min = min(grid_min, slack)
            if slack < 0:
                fails.append(f"eps={eps} n={n}: fano bound below (1-2eps)^2 n - 1")
    rows = []
    for theta in THETAS:
        for n in range(1, 4):
            prog = build_noisy_exact_ip(n, theta)
            eps = epsilon_of(prog).epsilon
            mi = mutual_information(attack_joint_distribution(make_clean(prog), n))
            lb = fano_bound(eps, n)
            rows.append({"theta": theta, "n": n, "epsilon": eps, "mutual_info": mi, "fano_bound": lb})
            if mi < lb - INFO_TOL:
                fails.append(f"theta={theta} n={n}: I={mi:.6g} < fano {lb:.6g}")
    return CheckResult(11, "Fano calculator", not fails, {"grid_min_slack": float(grid_min), "attack": rows},
                       {"grid": "fano_bound >= (1-2eps)^2 n - 1", "attack": "I >= fano_bound - tol",
                        "tolerance": INFO_TOL}, failures=fails[:20])


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: _exact_ip, 2: _clean_form, 3: _attack_exact, 4: _attack_noisy, 5: _two_bit_protocols,
    6: _classical_bound, 7: _capacity, 8: _holevo, 9: _interleaving, 10: _teleportation, 11: _fano,
}

SUITES: dict[str, tuple[int, ...]] = {
    "ip": (1, 2),
    "attack": (3, 4, 11),
    "classical": (5, 6),
    "capacity": (7,),
    "chi": (8,),
    "simulation": (9, 10),
    "all": tuple(CHECKS),
}


def run_check(i: int) -> CheckResult:
    return _timed(CHECKS[i])


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return [run_check(i) for i in SUITES[name]]
