"""Exact dense linear algebra for small multi-qubit systems.

Basis ordering is lexicographic with the first listed label as the most
significant bit, everywhere in this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

TOL = 1e-9
EIG_CUTOFF = 1e-12
# exact-zero test for matrix entries produced by closed forms
ZERO = 1e-14


class QCoreError(ValueError):
    """Invalid state, operator, or label reference."""


def _check_labels(labels: Sequence[str]) -> tuple[str, ...]:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise QCoreError(f"duplicate qubit labels in {labels}")
    return labels


def _positions(labels: Sequence[str], targets: Sequence[str]) -> list[int]:
    index = {lab: i for i, lab in enumerate(labels)}
    try:
        return [index[t] for t in targets]
    except KeyError as exc:
        raise QCoreError(f"unknown qubit label {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class Unitary:
    """A validated 2^t x 2^t unitary matrix."""

    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QCoreError(f"unitary must be square, got shape {m.shape}")
        dim = m.shape[0]
        if dim < 1 or dim & (dim - 1):
            raise QCoreError(f"unitary dimension {dim} is not a power of two")
        if not np.all(np.isfinite(m)):
            raise QCoreError("unitary has non-finite entries")
        err = np.abs(m @ m.conj().T - np.eye(dim)).max()
        if err > TOL:
            raise QCoreError(f"matrix {self.name or ''} is not unitary (error {err:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def dagger(self) -> "Unitary":
        name = self.name[:-1] if self.name.endswith("†") else (self.name + "†" if self.name else "")
        return Unitary(self.matrix.conj().T, name)


@dataclass(frozen=True, eq=False)
class StateVector:
    labels: tuple[str, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        labels = _check_labels(self.labels)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** len(labels):
            raise QCoreError(f"{len(labels)} labels need {2 ** len(labels)} amplitudes, got {amps.shape[0]}")
        if not np.all(np.isfinite(amps)):
            raise QCoreError("state has non-finite amplitudes")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > TOL:
            raise QCoreError(f"state is not normalized (norm^2 = {norm:.12g})")
        amps.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, labels: Sequence[str], bits: Sequence[int]) -> "StateVector":
        labels = tuple(labels)
        if len(bits) != len(labels):
            raise QCoreError("need one bit per label")
        amps = np.zeros(2 ** len(labels), dtype=complex)
        amps[bits_to_index(bits)] = 1.0
        return cls(labels, amps)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(self.labels + other.labels, np.kron(self.amplitudes, other.amplitudes))

    def reorder(self, labels: Sequence[str]) -> "StateVector":
        labels = tuple(labels)
        if sorted(labels) != sorted(self.labels):
            raise QCoreError(f"label sets differ: {self.labels} vs {labels}")
        if labels == self.labels:
            return self
        perm = _positions(self.labels, labels)
        psi = self.amplitudes.reshape((2,) * self.n_qubits).transpose(perm)
        return StateVector(labels, psi.reshape(-1))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.labels, np.outer(self.amplitudes, self.amplitudes.conj()))

    def probabilities(self, labels: Sequence[str] | None = None) -> dict[tuple[int, ...], float]:
        """Born probabilities of a standard-basis measurement of ``labels``."""
        labels = self.labels if labels is None else tuple(labels)
        return _marginal(self.amplitudes, self.labels, labels)

    def __repr__(self):
        return f"StateVector(labels={self.labels}, amplitudes={np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    labels: tuple[str, ...]
    matrix: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        labels = _check_labels(self.labels)
        m = np.asarray(self.matrix, dtype=complex)
        d = 2 ** len(labels)
        if m.shape != (d, d):
            raise QCoreError(f"density operator on {len(labels)} qubits must be {d}x{d}, got {m.shape}")
        if self.check:
            if not np.all(np.isfinite(m)):
                raise QCoreError("density operator has non-finite entries")
            if np.abs(m - m.conj().T).max() > TOL:
                raise QCoreError("density operator is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > TOL:
                raise QCoreError(f"density operator trace is {tr:.12g}, not 1")
            if np.linalg.eigvalsh(m).min() < -TOL:
                raise QCoreError("density operator is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def reorder(self, labels: Sequence[str]) -> "DensityOperator":
        labels = tuple(labels)
        if sorted(labels) != sorted(self.labels):
            raise QCoreError(f"label sets differ: {self.labels} vs {labels}")
        if labels == self.labels:
            return self
        k = self.n_qubits
        perm = _positions(self.labels, labels)
        t = self.matrix.reshape((2,) * (2 * k)).transpose(perm + [p + k for p in perm])
        return DensityOperator(labels, t.reshape(2**k, 2**k), check=False)


def bits_to_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, k: int) -> tuple[int, ...]:
    return tuple((index >> (k - 1 - i)) & 1 for i in range(k))


def _marginal(amps: np.ndarray, labels: Sequence[str], keep: Sequence[str]) -> dict[tuple[int, ...], float]:
    k = len(labels)
    pos = _positions(labels, keep)
    probs = (np.abs(amps) ** 2).reshape((2,) * k) if k else np.abs(amps) ** 2
    rest = tuple(i for i in range(k) if i not in pos)
    if rest:
        probs = probs.sum(axis=rest)
    # remaining axes are in increasing position order; bring them to `keep` order
    order = sorted(pos)
    probs = np.transpose(probs, [order.index(p) for p in pos]) if pos else probs
    flat = np.asarray(probs).reshape(-1)
    return {index_to_bits(i, len(keep)): float(p) for i, p in enumerate(flat) if p > 0.0}


# ---------------------------------------------------------------------------
# standard gates


def _u(m, name):
    return Unitary(np.array(m, dtype=complex), name)


_S2 = 1 / np.sqrt(2)
I2 = _u([[1, 0], [0, 1]], "I")
H = _u([[_S2, _S2], [_S2, -_S2]], "H")
X = _u([[0, 1], [1, 0]], "X")
Z = _u([[1, 0], [0, -1]], "Z")
CNOT = _u([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], "CNOT")
CZ = _u(np.diag([1, 1, 1, -1]), "CZ")
SWAP = _u([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], "SWAP")
_ccx = np.eye(8)
_ccx[6:8, 6:8] = [[0, 1], [1, 0]]
CCX = _u(_ccx, "CCX")


def ry(theta: float) -> Unitary:
    """Real rotation sending |0> to cos|0> + sin|1>."""
    c, s = np.cos(theta), np.sin(theta)
    return _u([[c, -s], [s, c]], f"RY({theta!r})")


# ---------------------------------------------------------------------------
# operations


def _apply_dense(amps: np.ndarray, k: int, pos: Sequence[int], m: np.ndarray) -> np.ndarray:
    t = len(pos)
    psi = amps.reshape((2,) * k)
    out = np.tensordot(m.reshape((2,) * (2 * t)), psi, axes=(list(range(t, 2 * t)), list(pos)))
    out = np.moveaxis(out, list(range(t)), list(pos))
    return out.reshape(-1)


def _as_unitary(u) -> Unitary:
    return u if isinstance(u, Unitary) else Unitary(np.asarray(u))


def apply_unitary(state: StateVector, u: Unitary | np.ndarray, targets: Sequence[str]) -> StateVector:
    u = _as_unitary(u)
    targets = _check_labels(targets)
    pos = _positions(state.labels, targets)
    if u.dim != 2 ** len(targets):
        raise QCoreError(f"unitary of dim {u.dim} cannot act on {len(targets)} qubits")
    return StateVector(state.labels, _apply_dense(state.amplitudes, state.n_qubits, pos, u.matrix))


def make_epr(labels: tuple[str, str] = ("epr_a", "epr_b")) -> StateVector:
    """(|00> + |11>)/sqrt(2) on two fresh labels."""
    return StateVector(labels, np.array([_S2, 0, 0, _S2], dtype=complex))


def reduced_density(state: StateVector, keep: Sequence[str]) -> DensityOperator:
    """Partial trace of a pure state, without forming the full projector."""
    keep = _check_labels(keep)
    pos = _positions(state.labels, keep)
    rest = [i for i in range(state.n_qubits) if i not in pos]
    psi = state.amplitudes.reshape((2,) * state.n_qubits).transpose(pos + rest)
    m = psi.reshape(2 ** len(pos), -1)
    return DensityOperator(keep, m @ m.conj().T, check=False)


def partial_trace(rho: DensityOperator | StateVector, keep: Sequence[str]) -> DensityOperator:
    if isinstance(rho, StateVector):
        return reduced_density(rho, keep)
    keep = _check_labels(keep)
    pos = _positions(rho.labels, keep)
    k = rho.n_qubits
    rest = [i for i in range(k) if i not in pos]
    t = rho.matrix.reshape((2,) * (2 * k)).transpose(pos + rest + [p + k for p in pos] + [r + k for r in rest])
    dk, dr = 2 ** len(pos), 2 ** len(rest)
    out = np.einsum("ijkj->ik", t.reshape(dk, dr, dk, dr))
    return DensityOperator(keep, out, check=False)


def eigenvalues(rho: DensityOperator) -> np.ndarray:
    m = rho.matrix
    if np.abs(m - m.conj().T).max() > TOL:
        raise QCoreError("entropy requires a Hermitian operator")
    return np.linalg.eigvalsh(m)


def von_neumann_entropy(rho: DensityOperator | np.ndarray) -> float:
    """-sum(l log2 l) over eigenvalues, dropping those below EIG_CUTOFF."""
    if isinstance(rho, np.ndarray):
        rho = DensityOperator(tuple(f"q{i}" for i in range(rho.shape[0].bit_length() - 1)), rho, check=False)
    lam = eigenvalues(rho)
    lam = lam[lam > EIG_CUTOFF]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def euclidean_distance(a: StateVector, b: StateVector) -> float:
    if sorted(a.labels) != sorted(b.labels):
        raise QCoreError(f"label sets differ: {a.labels} vs {b.labels}")
    b = b.reorder(a.labels)
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))


def is_unitary(m: np.ndarray, tol: float = TOL) -> bool:
    m = np.asarray(m, dtype=complex)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() <= tol


# ---------------------------------------------------------------------------
# factored simulation state


class FactoredState:
    """Pure state with untouched basis-state qubits kept as classical bits.

    Protocol inputs and ancillas start in basis states and many gates only
    use them as controls, so most qubits never need to enter the dense
    vector.  A qubit is moved into the dense part the first time a gate
    would put it into superposition, and moved back out when measured.
    Instances are never mutated after a method returns a new one.
    """

    __slots__ = ("labels", "classical", "active", "amps")

    def __init__(self, labels: Sequence[str], classical: Mapping[str, int],
                 active: Sequence[str] = (), amps: np.ndarray | None = None):
        self.labels = tuple(labels)
        self.classical = dict(classical)
        self.active = tuple(active)
        self.amps = np.ones(1, dtype=complex) if amps is None else amps

    @classmethod
    def from_basis(cls, labels: Sequence[str], bits: Mapping[str, int]) -> "FactoredState":
        return cls(labels, {lab: int(bits.get(lab, 0)) for lab in labels})

    def with_dense(self, state: StateVector) -> "FactoredState":
        """Replace classical qubits ``state.labels`` by the given dense state."""
        for lab in state.labels:
            if lab not in self.classical:
                raise QCoreError(f"{lab!r} is not a fresh classical qubit")
        classical = {k: v for k, v in self.classical.items() if k not in state.labels}
        return FactoredState(self.labels, classical, self.active + state.labels,
                             np.kron(self.amps, state.amplitudes))

    def _activate(self, labs: Iterable[str]) -> "FactoredState":
        labs = [lab for lab in labs if lab in self.classical]
        if not labs:
            return self
        amps = self.amps
        classical = dict(self.classical)
        for lab in labs:
            e = np.zeros(2, dtype=complex)
            e[classical.pop(lab)] = 1.0
            amps = np.kron(amps, e)
        return FactoredState(self.labels, classical, self.active + tuple(labs), amps)

    def apply(self, u: Unitary, targets: Sequence[str]) -> "FactoredState":
        targets = tuple(targets)
        for t in targets:
            if t not in self.classical and t not in self.active:
                raise QCoreError(f"unknown qubit label {t!r}")
        if u.dim != 2 ** len(targets):
            raise QCoreError(f"unitary of dim {u.dim} cannot act on {len(targets)} qubits")
        cls_t = [i for i, t in enumerate(targets) if t in self.classical]
        act_t = [i for i, t in enumerate(targets) if t not in self.classical]
        if cls_t:
            k = len(targets)
            order = cls_t + act_t
            m = u.matrix.reshape((2,) * (2 * k)).transpose(order + [o + k for o in order])
            dc, da = 2 ** len(cls_t), 2 ** len(act_t)
            m = m.reshape(dc, da, dc, da)
            v = bits_to_index([self.classical[targets[i]] for i in cls_t])
            col = m[:, :, v, :]
            rows = [w for w in range(dc) if np.abs(col[w]).max() > ZERO]
            if len(rows) == 1:
                w = rows[0]
                block = col[w]
                classical = dict(self.classical)
                for i, bit in zip(cls_t, index_to_bits(w, len(cls_t))):
                    classical[targets[i]] = bit
                if act_t:
                    pos = [self.active.index(targets[i]) for i in act_t]
                    amps = _apply_dense(self.amps, len(self.active), pos, block)
                else:
                    amps = self.amps * block[0, 0]
                return FactoredState(self.labels, classical, self.active, amps)
            return self._activate([targets[i] for i in cls_t]).apply(u, targets)
        pos = [self.active.index(t) for t in targets]
        return FactoredState(self.labels, self.classical, self.active,
                             _apply_dense(self.amps, len(self.active), pos, u.matrix))

    def probabilities(self, labels: Sequence[str]) -> dict[tuple[int, ...], float]:
        labels = tuple(labels)
        act = [lab for lab in labels if lab not in self.classical]
        sub = _marginal(self.amps, self.active, act) if act else {(): 1.0}
        out = {}
        for bits, p in sub.items():
            vals = dict(zip(act, bits))
            out[tuple(vals[lab] if lab in vals else self.classical[lab] for lab in labels)] = p
        return out

    def measure(self, labels: Sequence[str], cutoff: float = 0.0) -> list[tuple[tuple[int, ...], float, "FactoredState"]]:
        """Standard-basis measurement: list of (outcome, probability, post-state).

        Outcomes with probability <= cutoff are dropped.  Measured qubits
        become classical in the post-measurement states.
        """
        labels = tuple(labels)
        act = [lab for lab in labels if lab not in self.classical]
        if not act:
            return [(tuple(self.classical[lab] for lab in labels), 1.0, self)]
        k = len(self.active)
        pos = [self.active.index(lab) for lab in act]
        rest = [i for i in range(k) if i not in pos]
        psi = self.amps.reshape((2,) * k).transpose(pos + rest).reshape(2 ** len(pos), -1)
        out = []
        for idx in range(psi.shape[0]):
            row = psi[idx]
            p = float(np.vdot(row, row).real)
            if p <= cutoff:
                continue
            bits = index_to_bits(idx, len(act))
            classical = dict(self.classical)
            classical.update(zip(act, bits))
            post = FactoredState(self.labels, classical, tuple(self.active[i] for i in rest), row / np.sqrt(p))
            vals = dict(zip(act, bits))
            outcome = tuple(vals.get(lab, self.classical.get(lab)) for lab in labels)
            out.append((outcome, p, post))
        return out

    def to_statevector(self, labels: Sequence[str] | None = None) -> StateVector:
        labels = self.labels if labels is None else tuple(labels)
        full = self._activate(labels)
        extra = [lab for lab in full.active if lab not in labels]
        if extra:
            raise QCoreError(f"cannot drop entangled qubits {extra}")
        sv = StateVector(full.active, full.amps / np.linalg.norm(full.amps) * np.linalg.norm(self.amps))
        return sv.reorder(labels)

    def reduced_density(self, keep: Sequence[str]) -> DensityOperator:
        keep = tuple(keep)
        act_keep = [lab for lab in self.active if lab in keep]
        if act_keep:
            rho = reduced_density(StateVector(self.active, self.amps), act_keep).matrix
        else:
            rho = np.ones((1, 1), dtype=complex)
        cls_keep = [lab for lab in keep if lab in self.classical]
        for lab in cls_keep:
            proj = np.zeros((2, 2), dtype=complex)
            proj[self.classical[lab], self.classical[lab]] = 1.0
            rho = np.kron(rho, proj)
        return DensityOperator(tuple(act_keep) + tuple(cls_keep), rho, check=False).reorder(keep)

    def distance(self, other: "FactoredState") -> float:
        """Euclidean distance to another state on the same label set."""
        if sorted(self.labels) != sorted(other.labels):
            raise QCoreError("label sets differ")
        a, b = self, other
        common = [lab for lab in a.classical if lab in b.classical]
        if any(a.classical[lab] != b.classical[lab] for lab in common):
            na, nb = np.linalg.norm(a.amps), np.linalg.norm(b.amps)
            return float(np.sqrt(na**2 + nb**2))
        union = [lab for lab in a.labels if lab not in common]
        a = a._activate(union)
        b = b._activate(union)
        va = StateVector(a.active, a.amps).reorder(union).amplitudes
        vb = StateVector(b.active, b.amps).reorder(union).amplitudes
        return float(np.linalg.norm(va - vb))

    def overlap(self, other: "FactoredState") -> complex:
        common = [lab for lab in self.classical if lab in other.classical]
        if any(self.classical[lab] != other.classical[lab] for lab in common):
            return 0j
        union = [lab for lab in self.labels if lab not in common]
        a, b = self._activate(union), other._activate(union)
        va = StateVector(a.active, a.amps).reorder(union).amplitudes
        vb = StateVector(b.active, b.amps).reorder(union).amplitudes
        return complex(np.vdot(va, vb))

    @property
    def n_active(self) -> int:
        return len(self.active)
