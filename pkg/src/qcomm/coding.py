"""Superdense coding, teleportation-based simulation, and capacity protocols."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Sequence

from .protovm import (
    ClassicalBranch,
    LocalUnitary,
    MeasureStandard,
    OutputSpec,
    ProtocolError,
    ProtocolProgram,
    SendBit,
    SendQubit,
    Step,
    branch,
    local,
    measure,
    other,
    var,
    walk,
)
from .qcore import CNOT, CZ, H, X, Z


def superdense_encode(party: str, bit_hi: str, bit_lo: str, half: str) -> list[Step]:
    """Controlled Z^hi X^lo on ``half``, controls being qubits of ``party``."""
    return [local(party, CNOT, bit_lo, half), local(party, CZ, bit_hi, half)]


def superdense_decode(party: str, half_a: str, half_b: str) -> list[Step]:
    """Bell-basis to standard basis: afterwards half_a = hi bit, half_b = lo bit."""
    return [local(party, CNOT, half_a, half_b), local(party, H, half_a)]


@dataclass(frozen=True)
class SuperdenseLayout:
    steps: tuple
    epr_pairs: tuple
    alice_ancillas: tuple
    decoded: tuple  # Bob's qubits holding the transmitted bits, in input order


def superdense_transmission(bits: Sequence[str], prefix: str = "sd") -> SuperdenseLayout:
    """Steps sending Alice's qubits ``bits`` to Bob with ceil(n/2) qubits.

    Pairs of bits ride on EPR pairs; an unpaired last bit is copied onto a
    fresh basis-state qubit and sent as is.
    """
    bits = tuple(bits)
    n = len(bits)
    steps: list[Step] = []
    pairs, anc, decoded = [], [], []
    for i in range(n // 2):
        a, b = f"{prefix}{i}_a", f"{prefix}{i}_b"
        pairs.append((a, b))
        steps += superdense_encode("A", bits[2 * i], bits[2 * i + 1], a)
        steps.append(SendQubit("A", "B", a))
        steps += superdense_decode("B", a, b)
        decoded += [a, b]
    if n % 2:
        c = f"{prefix}_last"
        anc.append(c)
        steps += [local("A", CNOT, bits[-1], c), SendQubit("A", "B", c)]
        decoded.append(c)
    return SuperdenseLayout(tuple(steps), tuple(pairs), tuple(anc), tuple(decoded))


def build_superdense(n: int) -> ProtocolProgram:
    """Alice conveys n bits; Bob outputs them by measuring the decoded qubits."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = tuple(f"x{i}" for i in range(n))
    lay = superdense_transmission(xs)
    return ProtocolProgram(
        alice_inputs=xs,
        bob_inputs=(),
        alice_ancillas=lay.alice_ancillas,
        epr_pairs=lay.epr_pairs,
        steps=lay.steps,
        output=OutputSpec("B", qubits=lay.decoded),
        name=f"superdense-{n}",
        doc="Bob measures the decoded qubits; output is Alice's input string.",
    )


# ---------------------------------------------------------------------------
# teleportation


def teleport_gadget(src: str, qubit: str, pair: tuple[str, str], tag: str) -> tuple[list[Step], str]:
    """Teleport ``qubit`` from ``src`` through ``pair``; returns (steps, new label).

    ``pair`` is (Alice half, Bob half).  The sender Bell-measures the qubit
    together with its half and sends both outcomes; the receiver applies
    X^m2 then Z^m1 to its half, which then carries the qubit's state.
    """
    dst = other(src)
    s_half, r_half = (pair[0], pair[1]) if src == "A" else (pair[1], pair[0])
    m1, m2 = f"{tag}.m1", f"{tag}.m2"
    steps = [
        local(src, CNOT, qubit, s_half),
        local(src, H, qubit),
        measure(src, [qubit, s_half], [m1, m2]),
        SendBit(src, dst, m1, var(m1)),
        SendBit(src, dst, m2, var(m2)),
        branch(dst, var(m2), [local(dst, X, r_half)]),
        branch(dst, var(m1), [local(dst, Z, r_half)]),
    ]
    return steps, r_half


def teleport_simulate(program: ProtocolProgram) -> ProtocolProgram:
    """Replace each qubit transmission by teleportation over a fresh EPR pair.

    Later references to a teleported qubit are rewritten to the receiver's
    EPR half.  Labels whose rewriting differs between the arms of a
    classical branch may not be used after that branch.
    """
    for s in walk(program.steps):
        if isinstance(s, SendBit):
            raise ProtocolError("teleport_simulate expects a program without classical sends")
    pairs: list[tuple[str, str]] = []
    counter = [0]

    def sub(label, mapping):
        cur = mapping.get(label, label)
        if cur is None:
            raise ProtocolError(f"qubit {label!r} has branch-dependent location after teleportation")
        return cur

    def transform(steps, mapping):
        out: list[Step] = []
        for s in steps:
            if isinstance(s, SendQubit):
                k = counter[0]
                counter[0] += 1
                pair = (f"tp{k}_a", f"tp{k}_b")
                pairs.append(pair)
                g, new = teleport_gadget(s.src, sub(s.qubit, mapping), pair, f"tp{k}")
                out += g
                mapping[s.qubit] = new
            elif isinstance(s, LocalUnitary):
                out.append(LocalUnitary(s.party, s.unitary, tuple(sub(t, mapping) for t in s.targets)))
            elif isinstance(s, MeasureStandard):
                out.append(MeasureStandard(s.party, tuple(sub(q, mapping) for q in s.qubits), s.names))
            elif isinstance(s, ClassicalBranch):
                m1, m2 = dict(mapping), dict(mapping)
                then = transform(s.then, m1)
                orelse = transform(s.orelse, m2)
                for key in set(m1) | set(m2):
                    a, b = m1.get(key, key), m2.get(key, key)
                    mapping[key] = a if a == b else None
                out.append(ClassicalBranch(s.party, s.cond, tuple(then), tuple(orelse)))
            else:
                out.append(s)
        return out

    mapping: dict = {}
    steps = transform(program.steps, mapping)
    output = program.output
    if output.qubits:
        output = OutputSpec(output.party, tuple(sub(q, mapping) for q in output.qubits))
    return program.with_steps(
        steps,
        epr_pairs=program.epr_pairs + tuple(pairs),
        output=output,
        name=f"teleport({program.name})",
    )


# ---------------------------------------------------------------------------
# capacity region


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class CapacitySpec:
    n: int
    n_AB: int
    n_BA: int

    def __post_init__(self):
        for f in ("n", "n_AB", "n_BA"):
            v = getattr(self, f)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{f} must be a non-negative integer, got {v!r}")

    def violations(self) -> list[str]:
        out = []
        if self.n_AB < ceil(self.n / 2):
            out.append(f"n_AB >= ceil(n/2) violated: {self.n_AB} < {ceil(self.n / 2)}")
        if self.n_AB + self.n_BA < self.n:
            out.append(f"n_AB + n_BA >= n violated: {self.n_AB + self.n_BA} < {self.n}")
        return out

    @property
    def feasible(self) -> bool:
        return not self.violations()


def build_capacity_protocol(spec: CapacitySpec) -> ProtocolProgram:
    """Alice conveys n bits to Bob using exactly (n_AB, n_BA) qubit transmissions.

    Bob makes k = max(0, n - n_AB) EPR pairs and sends one half of each to
    Alice; Alice superdense-codes 2k bits on them and sends the remaining
    n - 2k bits as basis-state qubits.  Leftover allowance is spent on
    blank |0> qubits so the ledger matches the spec exactly.  No prior
    entanglement is used.
    """
    bad = spec.violations()
    if bad:
        raise InfeasibleSpec("; ".join(bad))
    n = spec.n
    k = max(0, n - spec.n_AB)
    xs = tuple(f"x{i}" for i in range(n))
    steps: list[Step] = []
    bob_anc: list[str] = []
    alice_anc: list[str] = []
    decoded: list[str] = []
    for i in range(k):
        a, b = f"ep{i}_a", f"ep{i}_b"
        bob_anc += [b, a]
        steps += [local("B", H, a), local("B", CNOT, a, b), SendQubit("B", "A", a)]
    for i in range(k):
        a, b = f"ep{i}_a", f"ep{i}_b"
        steps += superdense_encode("A", xs[2 * i], xs[2 * i + 1], a)
        steps.append(SendQubit("A", "B", a))
        steps += superdense_decode("B", a, b)
        decoded += [a, b]
    for j in range(2 * k, n):
        c = f"bs{j}"
        alice_anc.append(c)
        steps += [local("A", CNOT, xs[j], c), SendQubit("A", "B", c)]
        decoded.append(c)
    for j in range(spec.n_AB - (n - k)):
        c = f"padA{j}"
        alice_anc.append(c)
        steps.append(SendQubit("A", "B", c))
    for j in range(spec.n_BA - k):
        c = f"padB{j}"
        bob_anc.append(c)
        steps.append(SendQubit("B", "A", c))
    return ProtocolProgram(
        alice_inputs=xs,
        bob_inputs=(),
        alice_ancillas=tuple(alice_anc),
        bob_ancillas=tuple(bob_anc),
        steps=tuple(steps),
        output=OutputSpec("B", qubits=tuple(decoded)),
        name=f"capacity-{n}-{spec.n_AB}-{spec.n_BA}",
        doc="Bob measures the decoded qubits; output is Alice's input string.",
    )
