"""Two-party protocol programs and their exact branching execution.

Parties are ``"A"`` (Alice) and ``"B"`` (Bob).  Input bits are loaded as
basis-state qubits named by the program's input labels; the same labels are
also classical variables known to the owning party, so programs may branch
on them.  Every measurement and shared coin splits the execution into
weighted branches; nothing is sampled.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .qcore import CNOT, TOL, FactoredState, StateVector, Unitary, make_epr

PARTIES = ("A", "B")
# branches whose probability falls below this are numerically impossible
PROB_CUTOFF = 1e-15


class ProtocolError(ValueError):
    """Malformed program or illegal step during execution."""


def other(party: str) -> str:
    return "B" if party == "A" else "A"


def as_bits(bits: Union[str, Sequence[int], int, None], n: int | None = None) -> tuple[int, ...]:
    if bits is None:
        bits = ()
    if isinstance(bits, str):
        if bits and set(bits) - {"0", "1"}:
            raise ProtocolError(f"malformed bit string {bits!r}")
        out = tuple(int(c) for c in bits)
    elif isinstance(bits, (int, np.integer)):
        if n is None:
            raise ProtocolError("integer input needs an explicit length")
        out = tuple((int(bits) >> (n - 1 - i)) & 1 for i in range(n))
    else:
        out = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in out):
            raise ProtocolError(f"malformed bits {bits!r}")
    if n is not None and len(out) != n:
        raise ProtocolError(f"expected {n} bits, got {len(out)}")
    return out


def bitstr(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def all_inputs(n: int) -> list[tuple[int, ...]]:
    return [tuple(b) for b in product((0, 1), repeat=n)]


# ---------------------------------------------------------------------------
# classical expressions, stored as nested tuples so they serialize as JSON


def var(name: str):
    return ("var", name)


def const(v: int):
    return ("const", int(v))


def xor(*args):
    return ("xor",) + tuple(args)


def and_(*args):
    return ("and",) + tuple(args)


def or_(*args):
    return ("or",) + tuple(args)


def not_(a):
    return ("not", a)


def table(names: Sequence[str], values: Sequence[int]):
    """Lookup table indexed by the named bits, first name most significant."""
    names = tuple(names)
    values = tuple(int(v) for v in values)
    if len(values) != 2 ** len(names):
        raise ProtocolError("table needs 2^k entries")
    return ("table", names, values)


def equals(names: Sequence[str], bits: Sequence[int]):
    """1 iff the named bits spell ``bits``."""
    terms = [var(n) if b else not_(var(n)) for n, b in zip(names, bits)]
    return and_(*terms) if len(terms) != 1 else terms[0]


def expr_vars(e) -> set[str]:
    op = e[0]
    if op == "var":
        return {e[1]}
    if op == "const":
        return set()
    if op == "table":
        return set(e[1])
    out: set[str] = set()
    for a in e[1:]:
        out |= expr_vars(a)
    return out


def eval_expr(e, env: Mapping[str, int]) -> int:
    op = e[0]
    if op == "var":
        return env[e[1]]
    if op == "const":
        return e[1]
    if op == "xor":
        return sum(eval_expr(a, env) for a in e[1:]) & 1
    if op == "and":
        return int(all(eval_expr(a, env) for a in e[1:]))
    if op == "or":
        return int(any(eval_expr(a, env) for a in e[1:]))
    if op == "not":
        return 1 - eval_expr(e[1], env)
    if op == "table":
        idx = 0
        for n in e[1]:
            idx = (idx << 1) | env[n]
        return e[2][idx]
    raise ProtocolError(f"unknown expression operator {op!r}")


def map_expr(e, f: Callable[[str], str]):
    op = e[0]
    if op == "var":
        return ("var", f(e[1]))
    if op == "const":
        return e
    if op == "table":
        return ("table", tuple(f(n) for n in e[1]), e[2])
    return (op,) + tuple(map_expr(a, f) for a in e[1:])


def _check_expr(e):
    if not isinstance(e, tuple) or not e:
        raise ProtocolError(f"malformed expression {e!r}")
    op = e[0]
    if op in ("var",) and (len(e) != 2 or not isinstance(e[1], str)):
        raise ProtocolError(f"malformed expression {e!r}")
    if op == "const" and (len(e) != 2 or e[1] not in (0, 1)):
        raise ProtocolError(f"malformed expression {e!r}")
    if op == "not" and len(e) != 2:
        raise ProtocolError(f"malformed expression {e!r}")
    if op in ("xor", "and", "or", "not"):
        for a in e[1:]:
            _check_expr(a)
    elif op == "table":
        if len(e) != 3 or len(e[2]) != 2 ** len(e[1]):
            raise ProtocolError(f"malformed table expression {e!r}")
    elif op not in ("var", "const"):
        raise ProtocolError(f"unknown expression operator {op!r}")


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True, eq=False)
class LocalUnitary:
    party: str
    unitary: Unitary
    targets: tuple[str, ...]


@dataclass(frozen=True)
class SendQubit:
    src: str
    dst: str
    qubit: str


@dataclass(frozen=True)
class SendBit:
    """Sender evaluates ``expr`` on its own knowledge; both parties learn ``name``."""

    src: str
    dst: str
    name: str
    expr: tuple


@dataclass(frozen=True)
class MeasureStandard:
    party: str
    qubits: tuple[str, ...]
    names: tuple[str, ...]


@dataclass(frozen=True)
class SharedCoin:
    name: str


@dataclass(frozen=True)
class Assign:
    """Local classical computation."""

    party: str
    name: str
    expr: tuple


@dataclass(frozen=True, eq=False)
class ClassicalBranch:
    """``party`` may be "A", "B", or "AB" (condition must be common knowledge)."""

    party: str
    cond: tuple
    then: tuple = ()
    orelse: tuple = ()


Step = Union[LocalUnitary, SendQubit, SendBit, MeasureStandard, SharedCoin, Assign, ClassicalBranch]


def local(party: str, u: Unitary, *targets: str) -> LocalUnitary:
    return LocalUnitary(party, u, tuple(targets))


def measure(party: str, qubits: Sequence[str], names: Sequence[str] | str) -> MeasureStandard:
    qubits = tuple(qubits)
    names = (names,) if isinstance(names, str) else tuple(names)
    return MeasureStandard(party, qubits, names)


def branch(party: str, cond, then: Iterable[Step] = (), orelse: Iterable[Step] = ()) -> ClassicalBranch:
    return ClassicalBranch(party, cond, tuple(then), tuple(orelse))


def select(party: str, names: Sequence[str], arms: Mapping[tuple[int, ...], Sequence[Step]]) -> list[Step]:
    """Nested branches running ``arms[bits]`` where ``bits`` are the values of ``names``."""
    names = tuple(names)

    def build(prefix: tuple[int, ...]) -> list[Step]:
        if len(prefix) == len(names):
            return list(arms.get(prefix, ()))
        return [branch(party, var(names[len(prefix)]), build(prefix + (1,)), build(prefix + (0,)))]

    return build(())


@dataclass(frozen=True)
class OutputSpec:
    """Who announces the output and from what.

    Exactly one of ``qubits`` (measured in the standard basis at the end,
    must all be owned by the announcing party) or ``expr`` (over the
    announcing party's classical knowledge).  ``party="either"`` accepts
    whichever party holds the needed information in each branch; it is
    used by role-symmetric protocols where a coin picks the announcer.
    """

    party: str
    qubits: tuple[str, ...] = ()
    expr: Any = None

    def __post_init__(self):
        if self.party not in ("A", "B", "either"):
            raise ProtocolError(f"unknown output party {self.party!r}")
        if bool(self.qubits) == (self.expr is not None):
            raise ProtocolError("output needs exactly one of qubits or expr")


@dataclass(frozen=True, eq=False)
class SharedState:
    state: StateVector
    owners: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class ProtocolProgram:
    alice_inputs: tuple[str, ...]
    bob_inputs: tuple[str, ...]
    steps: tuple
    output: OutputSpec
    alice_ancillas: tuple[str, ...] = ()
    bob_ancillas: tuple[str, ...] = ()
    epr_pairs: tuple[tuple[str, str], ...] = ()
    shared: SharedState | None = None
    name: str = ""
    doc: str = ""

    def __post_init__(self):
        for f in ("alice_inputs", "bob_inputs", "alice_ancillas", "bob_ancillas", "steps"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        object.__setattr__(self, "epr_pairs", tuple(tuple(p) for p in self.epr_pairs))
        labels = self.labels
        if len(set(labels)) != len(labels):
            dup = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise ProtocolError(f"duplicate qubit labels {dup}")
        if self.shared is not None and len(self.shared.owners) != self.shared.state.n_qubits:
            raise ProtocolError("shared state needs one owner per qubit")

    @property
    def n_alice_input_bits(self) -> int:
        return len(self.alice_inputs)

    @property
    def n_bob_input_bits(self) -> int:
        return len(self.bob_inputs)

    @property
    def prior_entanglement(self) -> int:
        return len(self.epr_pairs)

    @property
    def labels(self) -> tuple[str, ...]:
        """Canonical order: Bob's inputs and ancillas, shared qubits, Alice's."""
        ent = tuple(lab for a, b in self.epr_pairs for lab in (b, a))
        sh = self.shared.state.labels if self.shared else ()
        return self.bob_inputs + self.bob_ancillas + ent + sh + self.alice_inputs + self.alice_ancillas

    def initial_owners(self) -> dict[str, str]:
        owners = {lab: "B" for lab in self.bob_inputs + self.bob_ancillas}
        owners.update({lab: "A" for lab in self.alice_inputs + self.alice_ancillas})
        for a, b in self.epr_pairs:
            owners[a], owners[b] = "A", "B"
        if self.shared:
            owners.update(zip(self.shared.state.labels, self.shared.owners))
        return owners

    def initial_state(self, x, y) -> FactoredState:
        x = as_bits(x, self.n_alice_input_bits)
        y = as_bits(y, self.n_bob_input_bits)
        bits = dict(zip(self.alice_inputs, x))
        bits.update(zip(self.bob_inputs, y))
        st = FactoredState.from_basis(self.labels, bits)
        for a, b in self.epr_pairs:
            st = st.with_dense(make_epr((a, b)))
        if self.shared:
            st = st.with_dense(self.shared.state)
        return st

    def with_steps(self, steps: Iterable[Step], **changes) -> "ProtocolProgram":
        return replace(self, steps=tuple(steps), **changes)


# ---------------------------------------------------------------------------
# ledger and outcomes

_COUNTERS = ("n_AB", "n_BA", "bits_AB", "bits_BA", "coins")


@dataclass(frozen=True)
class Ledger:
    """Communication counters; branch-dependent counts are the max over branches."""

    n_AB: int = 0
    n_BA: int = 0
    bits_AB: int = 0
    bits_BA: int = 0
    prior_epr: int = 0
    coins: int = 0
    per_branch: tuple = ()
    trace: list = field(default_factory=list, compare=False)

    @property
    def qubits(self) -> int:
        return self.n_AB + self.n_BA

    @property
    def bits(self) -> int:
        return self.bits_AB + self.bits_BA

    def as_dict(self) -> dict:
        return {"n_AB": self.n_AB, "n_BA": self.n_BA, "bits_AB": self.bits_AB, "bits_BA": self.bits_BA,
                "prior_epr": self.prior_epr, "coins": self.coins}


@dataclass(eq=False)
class Branch:
    probability: float
    state: FactoredState
    owners: dict
    env: dict
    knows: dict
    counts: dict
    transcript: tuple = ()
    output_distribution: dict = field(default_factory=dict)

    @property
    def statevector(self) -> StateVector:
        return self.state.to_statevector()

    def fork(self, **changes) -> "Branch":
        b = Branch(self.probability, self.state, dict(self.owners), dict(self.env), dict(self.knows),
                   dict(self.counts), self.transcript, {})
        for k, v in changes.items():
            setattr(b, k, v)
        return b


@dataclass(eq=False)
class ExecutionOutcome:
    program: ProtocolProgram
    x: tuple[int, ...]
    y: tuple[int, ...]
    branches: list[Branch]
    output_distribution: dict[tuple[int, ...], float]
    ledger: Ledger

    def probability_of(self, value) -> float:
        if isinstance(value, (int, np.integer)):
            value = (int(value),)
        return self.output_distribution.get(tuple(value), 0.0)


# ---------------------------------------------------------------------------
# execution


def _require_owner(b: Branch, party: str, qubits: Iterable[str]):
    for q in qubits:
        if q not in b.owners:
            raise ProtocolError(f"unknown qubit {q!r}")
        if b.owners[q] != party:
            raise ProtocolError(f"party {party} does not own qubit {q!r}")


def _known(b: Branch, party: str, e) -> bool:
    need = ("A", "B") if party == "AB" else (party,)
    for name in expr_vars(e):
        if name not in b.env:
            raise ProtocolError(f"variable {name!r} is undefined")
        if any(p not in b.knows[name] for p in need):
            return False
    return True


def _eval(b: Branch, party: str, e) -> int:
    _check_expr(e)
    if not _known(b, party, e):
        raise ProtocolError(f"party {party} cannot evaluate {e!r} from its own knowledge")
    return eval_expr(e, b.env)


def _learn(b: Branch, name: str, value: int, parties: Iterable[str]):
    """Record a classical value; equal re-assignments merge knowledge."""
    parties = frozenset(parties)
    if name in b.env and b.env[name] == value:
        b.knows[name] = b.knows[name] | parties
    else:
        b.knows[name] = parties
    b.env[name] = value
    b.transcript = b.transcript + ((name, value),)


def _run(steps: Sequence[Step], branches: list[Branch]) -> list[Branch]:
    for step in steps:
        nxt: list[Branch] = []
        for b in branches:
            nxt.extend(_step(step, b))
        branches = nxt
    return branches


def _step(step: Step, b: Branch) -> list[Branch]:
    if isinstance(step, LocalUnitary):
        _require_owner(b, step.party, step.targets)
        b = b.fork(state=b.state.apply(step.unitary, step.targets))
        return [b]
    if isinstance(step, SendQubit):
        if step.src == step.dst or step.src not in PARTIES or step.dst not in PARTIES:
            raise ProtocolError(f"bad send {step.src}->{step.dst}")
        _require_owner(b, step.src, [step.qubit])
        b = b.fork()
        b.owners[step.qubit] = step.dst
        b.counts["n_" + step.src + step.dst] += 1
        return [b]
    if isinstance(step, SendBit):
        if step.src == step.dst or step.src not in PARTIES or step.dst not in PARTIES:
            raise ProtocolError(f"bad send {step.src}->{step.dst}")
        value = _eval(b, step.src, step.expr)
        b = b.fork()
        _learn(b, step.name, value, PARTIES)
        b.counts["bits_" + step.src + step.dst] += 1
        return [b]
    if isinstance(step, Assign):
        value = _eval(b, step.party, step.expr)
        b = b.fork()
        _learn(b, step.name, value, (step.party,))
        return [b]
    if isinstance(step, MeasureStandard):
        if len(step.names) != len(step.qubits):
            raise ProtocolError("measurement needs one result name per qubit")
        _require_owner(b, step.party, step.qubits)
        out = []
        for bits, p, post in b.state.measure(step.qubits):
            prob = b.probability * p
            if prob <= PROB_CUTOFF:
                continue
            nb = b.fork(state=post, probability=prob)
            for name, bit in zip(step.names, bits):
                _learn(nb, name, bit, (step.party,))
            out.append(nb)
        return out
    if isinstance(step, SharedCoin):
        out = []
        for bit in (0, 1):
            nb = b.fork(probability=b.probability / 2)
            _learn(nb, step.name, bit, PARTIES)
            nb.counts["coins"] += 1
            out.append(nb)
        return out
    if isinstance(step, ClassicalBranch):
        if step.party not in ("A", "B", "AB"):
            raise ProtocolError(f"bad branch party {step.party!r}")
        arm = step.then if _eval(b, step.party, step.cond) else step.orelse
        return _run(arm, [b])
    raise ProtocolError(f"unknown step {step!r}")


def _initial_branch(program: ProtocolProgram, x, y) -> Branch:
    x = as_bits(x, program.n_alice_input_bits)
    y = as_bits(y, program.n_bob_input_bits)
    env = dict(zip(program.alice_inputs, x))
    env.update(zip(program.bob_inputs, y))
    knows = {k: frozenset("A") for k in program.alice_inputs}
    knows.update({k: frozenset("B") for k in program.bob_inputs})
    return Branch(1.0, program.initial_state(x, y), program.initial_owners(), env, knows,
                  {k: 0 for k in ("n_AB", "n_BA", "bits_AB", "bits_BA", "coins")})


def _output(program: ProtocolProgram, b: Branch) -> dict[tuple[int, ...], float]:
    spec = program.output
    parties = PARTIES if spec.party == "either" else (spec.party,)
    if spec.expr is not None:
        for p in parties:
            if _known(b, p, spec.expr):
                return {(eval_expr(spec.expr, b.env),): 1.0}
        raise ProtocolError(f"no eligible party knows the output {spec.expr!r}")
    owners = {b.owners.get(q) for q in spec.qubits}
    if None in owners:
        raise ProtocolError(f"unknown output qubits {spec.qubits}")
    if len(owners) != 1 or owners.pop() not in parties:
        raise ProtocolError(f"output qubits {spec.qubits} are not held by {spec.party}")
    return b.state.probabilities(spec.qubits)


def ledger_from_branches(program: ProtocolProgram, branches: Sequence[Branch]) -> Ledger:
    per = tuple(dict(b.counts) for b in branches)
    top = {k: max((c[k] for c in per), default=0) for k in _COUNTERS}
    return Ledger(prior_epr=program.prior_entanglement, per_branch=per, **top)


def execute(program: ProtocolProgram, x=(), y=()) -> ExecutionOutcome:
    """Run ``program`` on inputs (x, y), splitting on every measurement and coin."""
    x = as_bits(x, program.n_alice_input_bits)
    y = as_bits(y, program.n_bob_input_bits)
    branches = _run(program.steps, [_initial_branch(program, x, y)])
    dist: dict[tuple[int, ...], float] = {}
    for b in branches:
        b.output_distribution = _output(program, b)
        for value, p in b.output_distribution.items():
            dist[value] = dist.get(value, 0.0) + b.probability * p
    total = sum(b.probability for b in branches)
    if abs(total - 1.0) > TOL:
        raise ProtocolError(f"branch probabilities sum to {total!r}")
    return ExecutionOutcome(program, x, y, branches, dict(sorted(dist.items())), ledger_from_branches(program, branches))


def ledger_of(outcome: ExecutionOutcome) -> Ledger:
    return outcome.ledger


def iter_linear(program: ProtocolProgram, x=(), y=(), setup_epr: bool = False
                ) -> Iterator[tuple[str, Step | None, FactoredState, dict[str, str]]]:
    """Step through a measurement-free program, yielding (kind, step, state, owners).

    The first item is the initial configuration (kind ``"init"``).  With
    ``setup_epr`` the prior EPR pairs start wholly in Bob's hands and each
    Alice half is handed over by a ``"setup"`` step, so that prior
    entanglement shows up as Bob-to-Alice transmission.
    """
    b = _initial_branch(program, x, y)
    owners = b.owners
    state = b.state
    if setup_epr:
        for a, _ in program.epr_pairs:
            owners[a] = "B"
    yield "init", None, state, dict(owners)
    if setup_epr:
        for a, _ in program.epr_pairs:
            owners[a] = "A"
            yield "setup", None, state, dict(owners)
    for step in program.steps:
        if isinstance(step, LocalUnitary):
            for q in step.targets:
                if owners.get(q) != step.party:
                    raise ProtocolError(f"party {step.party} does not own qubit {q!r}")
            state = state.apply(step.unitary, step.targets)
            yield "unitary-" + step.party, step, state, dict(owners)
        elif isinstance(step, SendQubit):
            if owners.get(step.qubit) != step.src:
                raise ProtocolError(f"party {step.src} does not own qubit {step.qubit!r}")
            owners[step.qubit] = step.dst
            yield "send-" + step.src + step.dst, step, state, dict(owners)
        else:
            raise ProtocolError(f"step {type(step).__name__} is not allowed in a unitary protocol")


# ---------------------------------------------------------------------------
# success accounting


def _norm_value(v) -> tuple[int, ...]:
    if isinstance(v, (int, np.integer)):
        return (int(v),)
    return tuple(int(b) for b in v)


@dataclass(frozen=True)
class SuccessReport:
    program: str
    per_pair: dict
    weights: dict
    aggregate: float
    minimum: float
    mean: float


def uniform_weights(n_x: int, n_y: int) -> dict:
    pairs = [(x, y) for x in all_inputs(n_x) for y in all_inputs(n_y)]
    return {p: Fraction(1, len(pairs)) for p in pairs}


def _pair_success(args):
    program, target, x, y = args
    out = execute(program, x, y)
    return out.probability_of(_norm_value(target(x, y)))


def success_report(program: ProtocolProgram, target: Callable, weights: Mapping | None = None,
                   jobs: int = 1) -> SuccessReport:
    """Exact success probability of ``program`` against ``target`` per input pair."""
    if weights is None:
        weights = uniform_weights(program.n_alice_input_bits, program.n_bob_input_bits)
    weights = {(as_bits(x), as_bits(y)): w for (x, y), w in weights.items()}
    total = sum(weights.values())
    if abs(float(total) - 1.0) > TOL:
        raise ProtocolError(f"weights sum to {total}, not 1")
    if any(w < 0 for w in weights.values()):
        raise ProtocolError("negative weight")
    pairs = sorted(weights)
    args = [(program, target, x, y) for x, y in pairs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            vals = list(ex.map(_pair_success, args))
    else:
        vals = [_pair_success(a) for a in args]
    per_pair = dict(zip(pairs, vals))
    support = [p for p in pairs if weights[p] > 0]
    return SuccessReport(
        program=program.name,
        per_pair=per_pair,
        weights=weights,
        aggregate=float(sum(float(weights[p]) * per_pair[p] for p in pairs)),
        minimum=min(per_pair[p] for p in support),
        mean=float(np.mean(vals)),
    )


# ---------------------------------------------------------------------------
# program transformations


def _is_unitary_step(step) -> bool:
    return isinstance(step, (LocalUnitary, SendQubit))


def reverse(program: ProtocolProgram) -> ProtocolProgram:
    """Undo a measurement-free program: inverse unitaries, flipped sends, reversed order."""
    out = []
    for step in reversed(program.steps):
        if isinstance(step, LocalUnitary):
            out.append(LocalUnitary(step.party, step.unitary.dagger(), step.targets))
        elif isinstance(step, SendQubit):
            out.append(SendQubit(step.dst, step.src, step.qubit))
        else:
            raise ProtocolError(f"cannot reverse a {type(step).__name__} step")
    return program.with_steps(out, name=f"reverse({program.name})")


def concat(first: ProtocolProgram, second: ProtocolProgram) -> ProtocolProgram:
    """``first`` followed by ``second``'s steps; declarations and output of ``second``."""
    return second.with_steps(first.steps + second.steps, name=f"{first.name};{second.name}")


def map_steps(steps: Sequence[Step], qmap: Callable[[str], str], vmap: Callable[[str], str]) -> list[Step]:
    out: list[Step] = []
    for s in steps:
        if isinstance(s, LocalUnitary):
            out.append(LocalUnitary(s.party, s.unitary, tuple(qmap(t) for t in s.targets)))
        elif isinstance(s, SendQubit):
            out.append(SendQubit(s.src, s.dst, qmap(s.qubit)))
        elif isinstance(s, SendBit):
            out.append(SendBit(s.src, s.dst, vmap(s.name), map_expr(s.expr, vmap)))
        elif isinstance(s, Assign):
            out.append(Assign(s.party, vmap(s.name), map_expr(s.expr, vmap)))
        elif isinstance(s, MeasureStandard):
            out.append(MeasureStandard(s.party, tuple(qmap(q) for q in s.qubits), tuple(vmap(n) for n in s.names)))
        elif isinstance(s, SharedCoin):
            out.append(SharedCoin(vmap(s.name)))
        elif isinstance(s, ClassicalBranch):
            out.append(ClassicalBranch(s.party, map_expr(s.cond, vmap),
                                       tuple(map_steps(s.then, qmap, vmap)), tuple(map_steps(s.orelse, qmap, vmap))))
        else:
            raise ProtocolError(f"unknown step {s!r}")
    return out


def rename(program: ProtocolProgram, mapping: Mapping[str, str]) -> ProtocolProgram:
    """Rename qubit labels (and the input variables that share their names)."""
    q = lambda s: mapping.get(s, s)  # noqa: E731
    inputs = set(program.alice_inputs + program.bob_inputs)
    v = lambda s: mapping.get(s, s) if s in inputs else s  # noqa: E731
    out = program.output
    out = OutputSpec(out.party, tuple(q(l) for l in out.qubits), None if out.expr is None else map_expr(out.expr, v))
    shared = program.shared
    if shared is not None:
        shared = SharedState(StateVector(tuple(q(l) for l in shared.state.labels), shared.state.amplitudes), shared.owners)
    return replace(
        program,
        alice_inputs=tuple(map(q, program.alice_inputs)),
        bob_inputs=tuple(map(q, program.bob_inputs)),
        alice_ancillas=tuple(map(q, program.alice_ancillas)),
        bob_ancillas=tuple(map(q, program.bob_ancillas)),
        epr_pairs=tuple((q(a), q(b)) for a, b in program.epr_pairs),
        shared=shared,
        steps=tuple(map_steps(program.steps, q, v)),
        output=out,
    )


def walk(steps: Sequence[Step]) -> Iterator[Step]:
    for s in steps:
        yield s
        if isinstance(s, ClassicalBranch):
            yield from walk(s.then)
            yield from walk(s.orelse)


def epr_coin(name: str, pair: tuple[str, str]) -> list[Step]:
    """A shared coin drawn from an EPR pair: both parties measure their half."""
    a, b = pair
    return [measure("A", [a], name), measure("B", [b], name)]


def copy_to(party: str, src: str, dst: str) -> LocalUnitary:
    return local(party, CNOT, src, dst)


# ---------------------------------------------------------------------------
# JSON


def _mat_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _mat_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def _expr_to_json(e):
    if e is None:
        return None
    if e[0] == "table":
        return ["table", list(e[1]), list(e[2])]
    if e[0] in ("var", "const"):
        return list(e)
    return [e[0]] + [_expr_to_json(a) for a in e[1:]]


def _expr_from_json(e):
    if e is None:
        return None
    op = e[0]
    if op == "table":
        return ("table", tuple(e[1]), tuple(e[2]))
    if op in ("var", "const"):
        return tuple(e)
    return (op,) + tuple(_expr_from_json(a) for a in e[1:])


def step_to_dict(s: Step) -> dict:
    if isinstance(s, LocalUnitary):
        return {"kind": "unitary", "party": s.party, "targets": list(s.targets), "name": s.unitary.name,
                "matrix": _mat_to_json(s.unitary.matrix)}
    if isinstance(s, SendQubit):
        return {"kind": "send_qubit", "from": s.src, "to": s.dst, "qubit": s.qubit}
    if isinstance(s, SendBit):
        return {"kind": "send_bit", "from": s.src, "to": s.dst, "name": s.name, "expr": _expr_to_json(s.expr)}
    if isinstance(s, Assign):
        return {"kind": "assign", "party": s.party, "name": s.name, "expr": _expr_to_json(s.expr)}
    if isinstance(s, MeasureStandard):
        return {"kind": "measure", "party": s.party, "qubits": list(s.qubits), "names": list(s.names)}
    if isinstance(s, SharedCoin):
        return {"kind": "coin", "name": s.name}
    if isinstance(s, ClassicalBranch):
        return {"kind": "branch", "party": s.party, "cond": _expr_to_json(s.cond),
                "then": [step_to_dict(t) for t in s.then], "else": [step_to_dict(t) for t in s.orelse]}
    raise ProtocolError(f"unknown step {s!r}")


def step_from_dict(d: Mapping) -> Step:
    try:
        kind = d["kind"]
        if kind == "unitary":
            return LocalUnitary(d["party"], Unitary(_mat_from_json(d["matrix"]), d.get("name", "")), tuple(d["targets"]))
        if kind == "send_qubit":
            return SendQubit(d["from"], d["to"], d["qubit"])
        if kind == "send_bit":
            return SendBit(d["from"], d["to"], d["name"], _expr_from_json(d["expr"]))
        if kind == "assign":
            return Assign(d["party"], d["name"], _expr_from_json(d["expr"]))
        if kind == "measure":
            return MeasureStandard(d["party"], tuple(d["qubits"]), tuple(d["names"]))
        if kind == "coin":
            return SharedCoin(d["name"])
        if kind == "branch":
            return ClassicalBranch(d["party"], _expr_from_json(d["cond"]),
                                   tuple(step_from_dict(t) for t in d.get("then", [])),
                                   tuple(step_from_dict(t) for t in d.get("else", [])))
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed step {d!r}: {exc}") from None
    raise ProtocolError(f"unknown step kind {kind!r}")


SCHEMA_VERSION = 1


def to_dict(program: ProtocolProgram) -> dict:
    d = {
        "schema": SCHEMA_VERSION,
        "name": program.name,
        "doc": program.doc,
        "alice_inputs": list(program.alice_inputs),
        "bob_inputs": list(program.bob_inputs),
        "alice_ancillas": list(program.alice_ancillas),
        "bob_ancillas": list(program.bob_ancillas),
        "epr_pairs": [list(p) for p in program.epr_pairs],
        "steps": [step_to_dict(s) for s in program.steps],
        "output": {"party": program.output.party, "qubits": list(program.output.qubits),
                   "expr": _expr_to_json(program.output.expr)},
    }
    if program.shared is not None:
        d["shared"] = {"labels": list(program.shared.state.labels), "owners": list(program.shared.owners),
                       "amplitudes": [[float(a.real), float(a.imag)] for a in program.shared.state.amplitudes]}
    return d


def from_dict(d: Mapping) -> ProtocolProgram:
    try:
        if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ProtocolError(f"unsupported schema version {d.get('schema')}")
        shared = None
        if d.get("shared"):
            s = d["shared"]
            amps = np.array([complex(re, im) for re, im in s["amplitudes"]])
            shared = SharedState(StateVector(tuple(s["labels"]), amps), tuple(s["owners"]))
        out = d["output"]
        return ProtocolProgram(
            alice_inputs=tuple(d["alice_inputs"]),
            bob_inputs=tuple(d["bob_inputs"]),
            alice_ancillas=tuple(d.get("alice_ancillas", ())),
            bob_ancillas=tuple(d.get("bob_ancillas", ())),
            epr_pairs=tuple(tuple(p) for p in d.get("epr_pairs", ())),
            steps=tuple(step_from_dict(s) for s in d["steps"]),
            output=OutputSpec(out["party"], tuple(out.get("qubits") or ()), _expr_from_json(out.get("expr"))),
            shared=shared,
            name=d.get("name", ""),
            doc=d.get("doc", ""),
        )
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed protocol document: {exc}") from None


def dumps(program: ProtocolProgram) -> str:
    return json.dumps(to_dict(program), indent=1)


def loads(text: str) -> ProtocolProgram:
    return from_dict(json.loads(text))


def same_program(p: ProtocolProgram, q: ProtocolProgram) -> bool:
    """Structural equality, ignoring names."""
    a, b = to_dict(p), to_dict(q)
    a.pop("name"), b.pop("name")
    return a == b
