"""Inner product protocols, the clean-form transformation and the reduction attack."""
from __future__ import annotations

from dataclasses import dataclass
from math import log2
from typing import Callable, Sequence

import numpy as np

from .coding import superdense_transmission
from .protovm import (
    Assign,
    ClassicalBranch,
    LocalUnitary,
    MeasureStandard,
    OutputSpec,
    ProtocolError,
    ProtocolProgram,
    SendBit,
    SendQubit,
    Step,
    all_inputs,
    and_,
    as_bits,
    branch,
    const,
    execute,
    iter_linear,
    local,
    map_expr,
    map_steps,
    measure,
    reverse,
    var,
    walk,
    xor,
)
from .qcore import CCX, CNOT, ZERO, H, X, Z, Unitary, ry


def ip(x: Sequence[int], y: Sequence[int]) -> int:
    x, y = as_bits(x), as_bits(y)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    return sum(a & b for a, b in zip(x, y)) & 1


def _regs(n: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return tuple(f"x{i}" for i in range(n)), tuple(f"y{i}" for i in range(n))


def build_exact_ip(n: int) -> ProtocolProgram:
    """Superdense transmission of x, then Bob accumulates x.y into ``out`` with Toffolis."""
    xs, ys = _regs(n)
    lay = superdense_transmission(xs)
    steps = list(lay.steps)
    steps += [local("B", CCX, d, y, "out") for d, y in zip(lay.decoded, ys)]
    return ProtocolProgram(
        alice_inputs=xs,
        bob_inputs=ys,
        alice_ancillas=lay.alice_ancillas,
        bob_ancillas=("out",),
        epr_pairs=lay.epr_pairs,
        steps=tuple(steps),
        output=OutputSpec("B", qubits=("out",)),
        name=f"exact-ip-{n}",
        doc="Bob measures qubit 'out'.",
    )


def build_noisy_exact_ip(n: int, theta: float) -> ProtocolProgram:
    """``build_exact_ip`` followed by a real rotation by ``theta`` on the output qubit.

    Every input pair then errs with probability exactly sin^2(theta).
    """
    if not 0 <= theta < np.pi / 4:
        raise ValueError("theta must lie in [0, pi/4)")
    p = build_exact_ip(n)
    return p.with_steps(p.steps + (local("B", ry(theta), "out"),), name=f"noisy-ip-{n}-{theta:.6g}")


make_noisy_exact_ip = build_noisy_exact_ip


def build_classical_ip(n: int, flip: float = 0.0) -> ProtocolProgram:
    """Bit protocol: Alice sends her n bits one at a time, Bob announces x.y.

    With ``flip`` > 0 Bob XORs his answer with a private random bit that is
    1 with probability ``flip`` (drawn by measuring a rotated ancilla).
    """
    xs, ys = _regs(n)
    steps: list[Step] = [SendBit("A", "B", f"m{i}", var(x)) for i, x in enumerate(xs)]
    terms = [and_(var(f"m{i}"), var(y)) for i, y in enumerate(ys)]
    anc: tuple[str, ...] = ()
    if flip:
        if not 0 < flip < 1:
            raise ValueError("flip must lie in (0, 1)")
        anc = ("noise",)
        steps += [local("B", ry(np.arcsin(np.sqrt(flip))), "noise"), measure("B", ["noise"], "r")]
        terms.append(var("r"))
    return ProtocolProgram(
        alice_inputs=xs,
        bob_inputs=ys,
        bob_ancillas=anc,
        steps=tuple(steps),
        output=OutputSpec("B", expr=xor(*terms)),
        name=f"classical-ip-{n}" + (f"-flip{flip:g}" if flip else ""),
        doc="Bob announces the XOR of m_i AND y_i.",
    )


def build_constant(n: int, value: int = 0) -> ProtocolProgram:
    xs, ys = _regs(n)
    return ProtocolProgram(xs, ys, (), OutputSpec("B", expr=const(value)), name=f"constant-{value}-{n}")


# ---------------------------------------------------------------------------
# error profiles


@dataclass(frozen=True)
class ErrorProfile:
    per_pair: dict
    epsilon: float
    mean: float


def epsilon_of(program: ProtocolProgram, target: Callable = ip) -> ErrorProfile:
    """Per-pair error probabilities over all inputs and the worst case."""
    per = {}
    for x in all_inputs(program.n_alice_input_bits):
        for y in all_inputs(program.n_bob_input_bits):
            out = execute(program, x, y)
            t = target(x, y)
            t = (t,) if isinstance(t, int) else tuple(t)
            per[(x, y)] = min(1.0, max(0.0, 1.0 - out.probability_of(t)))
    vals = list(per.values())
    return ErrorProfile(per, max(vals), float(np.mean(vals)))


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * log2(p) - (1 - p) * log2(1 - p)


def fano_bound(epsilon: float, n: int) -> float:
    """Lower bound on bits learned when each input is recovered w.p. >= (1-2eps)^2."""
    if not 0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 1/2)")
    q = (1 - 2 * epsilon) ** 2
    return q * n - binary_entropy(q)


# ---------------------------------------------------------------------------
# clean form


def _keeps_basis(u: Unitary, pos: int) -> bool:
    """True if the gate never changes the standard-basis value of qubit ``pos``."""
    k = u.n_qubits
    m = u.matrix.reshape((2,) * (2 * k))
    idx_out = [slice(None)] * (2 * k)
    for a, b in ((0, 1), (1, 0)):
        idx = list(idx_out)
        idx[pos], idx[k + pos] = a, b
        if np.abs(m[tuple(idx)]).max() > ZERO:
            return False
    return True


def _touches_inputs(program: ProtocolProgram, inputs: Sequence[str]) -> bool:
    inputs = set(inputs)
    for s in program.steps:
        if isinstance(s, SendQubit) and s.qubit in inputs:
            return True
        if isinstance(s, LocalUnitary):
            for i, t in enumerate(s.targets):
                if t in inputs and not _keeps_basis(s.unitary, i):
                    return True
    return False


def protect_bob_inputs(program: ProtocolProgram) -> ProtocolProgram:
    """Copy Bob's inputs into ancillas when the program would otherwise modify them."""
    if not _touches_inputs(program, program.bob_inputs):
        return program
    copies = {y: f"{y}_copy" for y in program.bob_inputs}
    steps = [local("B", CNOT, y, c) for y, c in copies.items()]
    steps += map_steps(program.steps, lambda q: copies.get(q, q), lambda v: v)
    out = program.output
    out = OutputSpec(out.party, tuple(copies.get(q, q) for q in out.qubits), out.expr)
    return program.with_steps(steps, bob_ancillas=program.bob_ancillas + tuple(copies.values()), output=out)


def make_clean(program: ProtocolProgram, answer: str = "z") -> ProtocolProgram:
    """Forward run, CNOT of the output onto a fresh qubit, backward run.

    The result takes Bob's input as (z, y); on an exact protocol every
    qubit but ``answer`` returns to its initial value and ``answer``
    becomes z XOR f(x, y).
    """
    for s in program.steps:
        if not isinstance(s, (LocalUnitary, SendQubit)):
            raise ProtocolError(f"make_clean needs a unitary protocol, found {type(s).__name__}")
    out = program.output
    if out.expr is not None or len(out.qubits) != 1 or out.party != "B":
        raise ProtocolError("make_clean needs a single output qubit announced by Bob")
    if answer in program.labels:
        raise ProtocolError(f"label {answer!r} already in use")
    fwd = protect_bob_inputs(program)
    steps = fwd.steps + (local("B", CNOT, fwd.output.qubits[0], answer),) + reverse(fwd).steps
    return fwd.with_steps(
        steps,
        bob_inputs=(answer,) + fwd.bob_inputs,
        output=OutputSpec("B", qubits=(answer,)),
        name=f"clean({program.name})",
        doc=f"Bob's inputs are ({answer}, y); qubit {answer!r} ends as z XOR f(x, y).",
    )


def run_linear(program: ProtocolProgram, x, y):
    """Final (state, owners) of a measurement-free program."""
    *_, (_, _, state, owners) = iter_linear(program, x, y)
    return state, owners


def clean_residual(clean: ProtocolProgram, x, y, z: int, f: Callable = ip) -> tuple[float, bool]:
    """Distance between the final state and the ideal clean output, and ownership restored?"""
    x, y = as_bits(x), as_bits(y)
    state, owners = run_linear(clean, x, (z,) + y)
    ideal = clean.initial_state(x, ((z + f(x, y)) & 1,) + y)
    return state.distance(ideal), owners == clean.initial_owners()


# ---------------------------------------------------------------------------
# reduction attack


@dataclass(frozen=True)
class AttackReport:
    x: tuple[int, ...]
    probability: float
    euclidean_gap: float
    cos_theta: float
    outcomes: dict
    mutual_info_bound: float | None = None


def attack_program(clean: ProtocolProgram, n: int) -> ProtocolProgram:
    """Hadamards on Bob's first n+1 qubits, the clean protocol, Hadamards again."""
    if clean.n_bob_input_bits < n + 1:
        raise ProtocolError(f"clean program has {clean.n_bob_input_bits} Bob inputs, need {n + 1}")
    first = clean.bob_inputs[: n + 1]
    had = tuple(local("B", H, q) for q in first)
    return clean.with_steps(had + clean.steps + had, output=OutputSpec("B", qubits=first),
                            name=f"attack({clean.name})")


def reduction_attack(clean: ProtocolProgram, x, epsilon: float | None = None) -> AttackReport:
    """Bob sets z=1, y=0 and sandwiches the clean protocol between Hadamard layers.

    Returns the probability of reading (1, x) from his first n+1 qubits and
    the distance of the final state from the ideal one in which those
    qubits hold (1, x) and everything else is back to its initial value.
    """
    x = as_bits(x)
    n = len(x)
    if clean.n_alice_input_bits != n:
        raise ProtocolError(f"x has {n} bits, program expects {clean.n_alice_input_bits}")
    prog = attack_program(clean, n)
    bob = (1,) + (0,) * (clean.n_bob_input_bits - 1)
    state, _ = run_linear(prog, x, bob)
    outcomes = state.probabilities(prog.output.qubits)
    ideal = clean.initial_state(x, (1,) + x + (0,) * (clean.n_bob_input_bits - 1 - n))
    gap = state.distance(ideal)
    cos = ideal.overlap(state).real
    return AttackReport(
        x=x,
        probability=outcomes.get((1,) + x, 0.0),
        euclidean_gap=gap,
        cos_theta=float(np.clip(cos, -1.0, 1.0)),
        outcomes=outcomes,
        mutual_info_bound=None if epsilon is None else fano_bound(epsilon, n),
    )


def attack_joint_distribution(clean: ProtocolProgram, n: int) -> dict:
    """Joint distribution of (x, Bob's n+1 measured bits) for uniform x."""
    joint = {}
    for x in all_inputs(n):
        rep = reduction_attack(clean, x)
        for out, p in rep.outcomes.items():
            joint[(x, out)] = p / 2**n
    return joint


def classical_clean_view(n: int, y, z: int = 0) -> dict:
    """Bob's final register per x when a clean classical IP protocol runs on basis inputs.

    Alice sends her bits as basis-state qubits; no superposition is ever
    created, so this is a reversible classical computation.  Returns
    {x: Bob's final bits}.
    """
    xs, ys = _regs(n)
    anc = tuple(f"c{i}" for i in range(n))
    steps: list[Step] = []
    for x, c in zip(xs, anc):
        steps += [local("A", CNOT, x, c), SendQubit("A", "B", c)]
    steps += [local("B", CCX, c, y_, "out") for c, y_ in zip(anc, ys)]
    prog = ProtocolProgram(xs, ys, tuple(steps), OutputSpec("B", qubits=("out",)),
                           alice_ancillas=anc, bob_ancillas=("out",), name=f"classical-send-ip-{n}")
    clean = make_clean(prog)
    y = as_bits(y, n)
    view = {}
    for x in all_inputs(n):
        state, owners = run_linear(clean, x, (z,) + y)
        if state.active:
            raise AssertionError("classical run created superposition")
        bob = sorted(q for q, p in owners.items() if p == "B")
        view[x] = tuple(state.classical[q] for q in bob)
    return view


# ---------------------------------------------------------------------------
# interleaving


def _rename_copy(program: ProtocolProgram, tag: str, offset: int):
    inputs = {}
    for i, lab in enumerate(program.alice_inputs):
        inputs[lab] = f"x{offset + i}"
    for i, lab in enumerate(program.bob_inputs):
        inputs[lab] = f"y{offset + i}"
    q = lambda s: inputs.get(s, f"{tag}.{s}")  # noqa: E731
    return q


def interleave_to_qubits(bit_program: ProtocolProgram) -> ProtocolProgram:
    """Two interleaved copies of an IP_n bit protocol, giving a qubit protocol for IP_2n.

    The k-th classical message of both copies goes out in the same turn,
    superdense-coded into one qubit over a fresh EPR pair.  The output is
    the XOR of the two copies' outputs, announced by the same party.
    """
    sends = [s for s in bit_program.steps if isinstance(s, SendBit)]
    for s in walk(bit_program.steps):
        if isinstance(s, SendQubit):
            raise ProtocolError("interleaving needs a bit protocol; found a qubit send")
        if isinstance(s, ClassicalBranch) and any(isinstance(t, (SendBit, SendQubit)) for t in walk(s.then + s.orelse)):
            raise ProtocolError("communication pattern depends on a branch; cannot pair messages")
    if bit_program.n_alice_input_bits != bit_program.n_bob_input_bits:
        raise ProtocolError("IP protocol needs equal input lengths")
    out = bit_program.output
    if out.expr is None or out.party == "either":
        raise ProtocolError("interleaving needs an output expression announced by a fixed party")
    n = bit_program.n_alice_input_bits
    maps = [_rename_copy(bit_program, f"c{c}", c * n) for c in (0, 1)]

    segments: list[list[Step]] = [[]]
    for s in bit_program.steps:
        if isinstance(s, SendBit):
            segments.append([])
        else:
            segments[-1].append(s)

    steps: list[Step] = []
    pairs: list[tuple[str, str]] = []
    for k, seg in enumerate(segments):
        for m in maps:
            steps += map_steps(seg, m, m)
        if k == len(sends):
            break
        s = sends[k]
        a, b = f"sd{k}_a", f"sd{k}_b"
        pairs.append((a, b))
        snd, rcv = s.src, s.dst
        s_half, r_half = (a, b) if snd == "A" else (b, a)
        names = [maps[c](s.name) for c in (0, 1)]
        for c, m in enumerate(maps):
            steps.append(Assign(snd, names[c], map_expr(s.expr, m)))
        steps.append(branch(snd, var(names[1]), [local(snd, X, s_half)]))
        steps.append(branch(snd, var(names[0]), [local(snd, Z, s_half)]))
        steps.append(SendQubit(snd, rcv, s_half))
        steps += [local(rcv, CNOT, s_half, r_half), local(rcv, H, s_half)]
        steps.append(MeasureStandard(rcv, (s_half, r_half), tuple(names)))

    return ProtocolProgram(
        alice_inputs=tuple(f"x{i}" for i in range(2 * n)),
        bob_inputs=tuple(f"y{i}" for i in range(2 * n)),
        alice_ancillas=tuple(maps[c](l) for c in (0, 1) for l in bit_program.alice_ancillas),
        bob_ancillas=tuple(maps[c](l) for c in (0, 1) for l in bit_program.bob_ancillas),
        epr_pairs=tuple((maps[c](a), maps[c](b)) for c in (0, 1) for a, b in bit_program.epr_pairs) + tuple(pairs),
        steps=tuple(steps),
        output=OutputSpec(out.party, expr=xor(map_expr(out.expr, maps[0]), map_expr(out.expr, maps[1]))),
        name=f"interleave({bit_program.name})",
        doc="Output is the XOR of both copies' outputs.",
    )

