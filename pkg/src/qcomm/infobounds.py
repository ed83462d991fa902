"""Holevo chi and entropy bookkeeping along protocol executions."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import log2
from typing import Mapping, Sequence, TextIO

import numpy as np

from .protovm import Ledger, ProtocolError, ProtocolProgram, all_inputs, as_bits, iter_linear
from .qcore import DensityOperator, QCoreError, von_neumann_entropy

VIOLATION_TOL = 1e-7
INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class Ensemble:
    members: tuple[tuple[float, DensityOperator], ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise QCoreError("empty ensemble")
        labels = members[0][1].labels
        for _, rho in members:
            if rho.labels != labels:
                raise QCoreError(f"ensemble members act on different qubits: {labels} vs {rho.labels}")
        total = sum(p for p, _ in members)
        tol = 0 if all(isinstance(p, (Fraction, int)) for p, _ in members) else 1e-12
        if abs(total - 1) > tol:
            raise QCoreError(f"ensemble probabilities sum to {total}")
        object.__setattr__(self, "members", members)

    def average(self) -> DensityOperator:
        labels = self.members[0][1].labels
        m = sum(float(p) * rho.matrix for p, rho in self.members)
        return DensityOperator(labels, m, check=False)


def holevo_chi(ens: Ensemble) -> float:
    """S(sum p rho) - sum p S(rho), in bits."""
    avg = von_neumann_entropy(ens.average())
    return avg - sum(float(p) * von_neumann_entropy(rho) for p, rho in ens.members if p)


def mutual_information(joint: Mapping) -> float:
    """I(X:Y) in bits from {(x, y): p}."""
    if any(p < 0 for p in joint.values()):
        raise ValueError("negative probability")
    total = float(sum(joint.values()))
    if abs(total - 1) > 1e-9:
        raise ValueError(f"joint distribution sums to {total}")
    px: dict = {}
    py: dict = {}
    for (x, y), p in joint.items():
        px[x] = px.get(x, 0.0) + float(p)
        py[y] = py.get(y, 0.0) + float(p)
    h = lambda d: -sum(p * log2(p) for p in d.values() if p > 0)  # noqa: E731
    return h(px) + h(py) - h({k: float(v) for k, v in joint.items()})


# ---------------------------------------------------------------------------
# chi traces


@dataclass(frozen=True)
class ChiRecord:
    step: int
    kind: str
    S: float
    chi: float


@dataclass
class ChiTrace:
    program: str
    y: tuple
    records: list[ChiRecord] = field(default_factory=list)
    final_bob: tuple = ()
    mutual_info: float | None = None

    @property
    def final_chi(self) -> float:
        return self.records[-1].chi

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "kind", "S", "chi"])
        for r in self.records:
            w.writerow([r.step, r.kind, f"{r.S:.12g}", f"{r.chi:.12g}"])


def uniform(n: int) -> dict:
    xs = all_inputs(n)
    return {x: Fraction(1, len(xs)) for x in xs}


def chi_trace(program: ProtocolProgram, input_dist: Mapping | None = None, y=()) -> ChiTrace:
    """Entropy S and Holevo chi of Bob's qubits after every step, with y fixed.

    Prior EPR pairs are treated as made by Bob and handed over by
    ``setup`` steps before the protocol proper.  At the end Bob measures
    all his qubits in the standard basis and I(X:Y) is recorded.
    """
    if input_dist is None:
        input_dist = uniform(program.n_alice_input_bits)
    y = as_bits(y, program.n_bob_input_bits)
    xs = [as_bits(x) for x in input_dist]
    probs = [float(p) for p in input_dist.values()]
    if abs(sum(probs) - 1) > 1e-9:
        raise ValueError("input distribution does not sum to 1")
    runs = [iter_linear(program, x, y, setup_epr=True) for x in xs]
    trace = ChiTrace(program.name, y)
    idx = 0
    final = None
    while True:
        items = [next(r, None) for r in runs]
        if items[0] is None:
            break
        kind, _, _, owners = items[0]
        bob = tuple(q for q in program.labels if owners[q] == "B")
        states = [st for _, _, st, _ in items]
        # basis-state qubits with the same value for every x factor out of S and chi
        keep = tuple(q for q in bob if len({st.classical.get(q, -1) for st in states} - {-1}) != 1
                     or any(q not in st.classical for st in states))
        rhos = [st.reduced_density(keep) for st in states]
        ens = Ensemble(tuple(zip(probs, rhos)))
        avg = ens.average()
        s_avg = von_neumann_entropy(avg)
        chi = s_avg - sum(p * von_neumann_entropy(r) for p, r in zip(probs, rhos) if p)
        trace.records.append(ChiRecord(idx, kind, s_avg, max(chi, 0.0)))
        idx += 1
        final = (bob, [st for _, _, st, _ in items])
    bob, states = final
    trace.final_bob = bob
    joint = {}
    for x, p, st in zip(xs, probs, states):
        for out, q in st.probabilities(bob).items():
            joint[(x, out)] = joint.get((x, out), 0.0) + p * q
    trace.mutual_info = mutual_information(joint)
    return trace


@dataclass
class Verdict:
    ok: bool
    violations: list[str]
    final_chi: float
    chi_bound: float


def assert_step_bounds(trace: ChiTrace, ledger: Ledger, tol: float = VIOLATION_TOL,
                          unitary_tol: float = INVARIANCE_TOL) -> Verdict:
    """Check each step against its allowed change in S and chi.

    Local unitaries: no change.  Alice-to-Bob send: chi +2, S +1 at most.
    Bob-to-Alice send (and entanglement setup): chi does not grow, S +1 at
    most.  Finally chi <= min(2 n_AB, n_AB + n_BA), where n_BA includes
    the setup hand-overs.
    """
    n_ab = sum(r.kind == "send-AB" for r in trace.records)
    n_ba = sum(r.kind == "send-BA" for r in trace.records)
    setup = sum(r.kind == "setup" for r in trace.records)
    if (n_ab, n_ba, setup) != (ledger.n_AB, ledger.n_BA, ledger.prior_epr):
        raise ProtocolError(f"trace sends ({n_ab}, {n_ba}, setup {setup}) do not match ledger "
                            f"({ledger.n_AB}, {ledger.n_BA}, epr {ledger.prior_epr})")
    bad = []
    recs = trace.records
    if recs[0].S > tol or recs[0].chi > tol:
        bad.append(f"step 0: initial S={recs[0].S:.3g}, chi={recs[0].chi:.3g} not 0")
    for prev, cur in zip(recs, recs[1:]):
        ds, dchi = cur.S - prev.S, cur.chi - prev.chi
        if cur.kind.startswith("unitary"):
            if abs(ds) > unitary_tol or abs(dchi) > unitary_tol:
                bad.append(f"step {cur.step} ({cur.kind}): dS={ds:.3g}, dchi={dchi:.3g} should be 0")
        elif cur.kind == "send-AB":
            if dchi > 2 + tol or ds > 1 + tol:
                bad.append(f"step {cur.step} ({cur.kind}): dS={ds:.3g}, dchi={dchi:.3g}")
        elif cur.kind in ("send-BA", "setup"):
            if dchi > tol or ds > 1 + tol:
                bad.append(f"step {cur.step} ({cur.kind}): dS={ds:.3g}, dchi={dchi:.3g}")
        if cur.chi > cur.S + tol:
            bad.append(f"step {cur.step}: chi={cur.chi:.6g} exceeds S={cur.S:.6g}")
    bound = min(2 * n_ab, n_ab + n_ba + setup)
    if trace.final_chi > bound + tol:
        bad.append(f"final chi {trace.final_chi:.6g} exceeds min(2 n_AB, n_AB + n_BA) = {bound}")
    if trace.mutual_info is not None and trace.mutual_info > trace.final_chi + tol:
        bad.append(f"I(X:Y) {trace.mutual_info:.6g} exceeds final chi {trace.final_chi:.6g}")
    return Verdict(not bad, bad, trace.final_chi, bound)


assert_theorem2_steps = assert_step_bounds


def check_program(program: ProtocolProgram, y=None, input_dist: Mapping | None = None) -> tuple[ChiTrace, Verdict]:
    """chi_trace + assert_step_bounds with the program's own ledger."""
    from .protovm import execute

    if y is None:
        y = (0,) * program.n_bob_input_bits
    trace = chi_trace(program, input_dist, y)
    x0 = next(iter(input_dist)) if input_dist else (0,) * program.n_alice_input_bits
    ledger = execute(program, x0, y).ledger
    return trace, assert_step_bounds(trace, ledger)


def average_over_y(program: ProtocolProgram, input_dist: Mapping | None = None) -> ChiTrace:
    """Step-wise mean of S and chi over all Bob inputs (uniform)."""
    traces = [chi_trace(program, input_dist, y) for y in all_inputs(program.n_bob_input_bits)]
    out = ChiTrace(program.name, ("avg",))
    for recs in zip(*(t.records for t in traces)):
        out.records.append(ChiRecord(recs[0].step, recs[0].kind, float(np.mean([r.S for r in recs])),
                                     float(np.mean([r.chi for r in recs]))))
    out.mutual_info = float(np.mean([t.mutual_info for t in traces]))
    return out


def entropy_bits(probs: Sequence[float]) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())
