import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from qcomm.qcore import (
    CCX,
    CNOT,
    CZ,
    H,
    SWAP,
    X,
    Z,
    DensityOperator,
    FactoredState,
    QCoreError,
    StateVector,
    Unitary,
    apply_unitary,
    bits_to_index,
    euclidean_distance,
    index_to_bits,
    is_unitary,
    make_epr,
    partial_trace,
    reduced_density,
    ry,
    von_neumann_entropy,
)

seeds = st.integers(0, 2**32 - 1)


def test_basis_ordering_first_label_is_most_significant():
    sv = StateVector.basis(("a", "b", "c"), (1, 0, 0))
    assert np.argmax(np.abs(sv.amplitudes)) == 4
    assert bits_to_index((1, 0, 1)) == 5
    assert index_to_bits(6, 3) == (1, 1, 0)


def test_hadamard_on_zero():
    sv = apply_unitary(StateVector.basis(("q",), (0,)), H, ["q"])
    np.testing.assert_allclose(sv.amplitudes, [2**-0.5, 2**-0.5])


def test_distance_zero_to_plus():
    zero = StateVector.basis(("q",), (0,))
    plus = apply_unitary(zero, H, ["q"])
    # |(1,0) - (1,1)/sqrt2| = sqrt(2 - sqrt2)
    assert euclidean_distance(zero, plus) == pytest.approx(0.7653668647301796, abs=1e-12)


def test_cnot_truth_table():
    for a in (0, 1):
        for b in (0, 1):
            sv = apply_unitary(StateVector.basis(("c", "t"), (a, b)), CNOT, ["c", "t"])
            assert sv.probabilities() == {(a, a ^ b): pytest.approx(1.0)}


def test_toffoli_and_swap_on_basis():
    sv = apply_unitary(StateVector.basis(("a", "b", "c"), (1, 1, 0)), CCX, ["a", "b", "c"])
    assert sv.probabilities()[(1, 1, 1)] == pytest.approx(1.0)
    sv = apply_unitary(StateVector.basis(("a", "b"), (1, 0)), SWAP, ["a", "b"])
    assert sv.probabilities()[(0, 1)] == pytest.approx(1.0)


def test_cz_is_symmetric():
    np.testing.assert_allclose(CZ.matrix, SWAP.matrix @ CZ.matrix @ SWAP.matrix)


def test_targets_order_matters():
    sv = StateVector.basis(("a", "b"), (0, 1))
    out = apply_unitary(sv, CNOT, ["b", "a"])
    assert out.probabilities()[(1, 1)] == pytest.approx(1.0)


def test_ry_error_probability():
    theta = 0.3
    sv = apply_unitary(StateVector.basis(("q",), (0,)), ry(theta), ["q"])
    assert sv.probabilities()[(1,)] == pytest.approx(np.sin(theta) ** 2)


def test_epr_marginal_is_maximally_mixed():
    rho = reduced_density(make_epr(("a", "b")), ["a"])
    np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)
    assert von_neumann_entropy(rho) == pytest.approx(1.0)
    assert von_neumann_entropy(make_epr().density()) == pytest.approx(0.0, abs=1e-12)


def test_entropy_of_diagonal():
    rho = DensityOperator(("a",), np.diag([0.25, 0.75]))
    h = -(0.25 * np.log2(0.25) + 0.75 * np.log2(0.75))
    assert von_neumann_entropy(rho) == pytest.approx(h)


@pytest.mark.parametrize("matrix", [
    [[1, 1], [0, 1]],
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    [[np.nan, 0], [0, 1]],
    [[1, 0]],
])
def test_unitary_validation(matrix):
    with pytest.raises(QCoreError):
        Unitary(np.array(matrix, dtype=complex))


def test_state_validation():
    with pytest.raises(QCoreError):
        StateVector(("a",), [1, 1])
    with pytest.raises(QCoreError):
        StateVector(("a", "a"), [1, 0, 0, 0])
    with pytest.raises(QCoreError):
        StateVector(("a",), [1, 0, 0, 0])


def test_density_validation():
    with pytest.raises(QCoreError):
        DensityOperator(("a",), np.diag([0.5, 0.6]))
    with pytest.raises(QCoreError):
        DensityOperator(("a",), np.diag([1.5, -0.5]))
    with pytest.raises(QCoreError):
        DensityOperator(("a",), np.array([[0.5, 0.5], [0, 0.5]]))


def test_apply_checks_arity():
    with pytest.raises(QCoreError):
        apply_unitary(StateVector.basis(("a", "b"), (0, 0)), H, ["a", "b"])
    with pytest.raises(QCoreError):
        apply_unitary(StateVector.basis(("a",), (0,)), H, ["zz"])


def test_dagger_name_toggles():
    assert H.dagger().name == "H†"
    assert H.dagger().dagger().name == "H"


@given(seeds, st.integers(1, 3))
def test_random_unitaries_preserve_norm(seed, k):
    rng = np.random.default_rng(seed)
    u = random_unitary(2**k, rng)
    assert is_unitary(u)
    labels = tuple(f"q{i}" for i in range(k + 1))
    sv = StateVector(labels, random_state(k + 1, rng))
    out = apply_unitary(sv, u, labels[1:])
    assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)


@given(seeds)
def test_reorder_roundtrip(seed):
    rng = np.random.default_rng(seed)
    sv = StateVector(("a", "b", "c"), random_state(3, rng))
    back = sv.reorder(("c", "a", "b")).reorder(("a", "b", "c"))
    np.testing.assert_allclose(back.amplitudes, sv.amplitudes)
    assert euclidean_distance(sv, sv.reorder(("b", "c", "a"))) == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_entropy_invariant_under_local_unitary(seed):
    rng = np.random.default_rng(seed)
    sv = StateVector(("a", "b", "c"), random_state(3, rng))
    before = von_neumann_entropy(reduced_density(sv, ["a", "b"]))
    after = von_neumann_entropy(reduced_density(apply_unitary(sv, random_unitary(4, rng), ["b", "a"]), ["a", "b"]))
    assert after == pytest.approx(before, abs=1e-9)


@given(seeds)
def test_araki_lieb_and_subadditivity(seed):
    rng = np.random.default_rng(seed)
    sv = StateVector(("a", "b", "e1", "e2"), random_state(4, rng))
    rho_ab = reduced_density(sv, ["a", "b"])
    s_ab = von_neumann_entropy(rho_ab)
    s_a = von_neumann_entropy(partial_trace(rho_ab, ["a"]))
    s_b = von_neumann_entropy(partial_trace(rho_ab, ["b"]))
    assert abs(s_a - s_b) <= s_ab + 1e-9
    assert s_ab <= s_a + s_b + 1e-9


@given(seeds)
def test_partial_trace_matches_pure_reduction(seed):
    rng = np.random.default_rng(seed)
    sv = StateVector(("a", "b", "c"), random_state(3, rng))
    np.testing.assert_allclose(partial_trace(sv.density(), ["c", "a"]).matrix,
                               reduced_density(sv, ["c", "a"]).matrix, atol=1e-12)


GATES = [(H, 1), (X, 1), (Z, 1), (ry(0.7), 1), (CNOT, 2), (CZ, 2), (SWAP, 2), (CCX, 3)]


@given(st.lists(st.tuples(st.integers(0, len(GATES) - 1), st.permutations(range(4))), max_size=12),
       st.tuples(*[st.integers(0, 1)] * 4))
def test_factored_state_matches_dense(circuit, bits):
    labels = ("a", "b", "c", "d")
    fs = FactoredState.from_basis(labels, dict(zip(labels, bits)))
    sv = StateVector.basis(labels, bits)
    for g, perm in circuit:
        u, k = GATES[g]
        targets = [labels[i] for i in perm[:k]]
        fs = fs.apply(u, targets)
        sv = apply_unitary(sv, u, targets)
    dense = fs.to_statevector(labels)
    assert euclidean_distance(dense, sv) == pytest.approx(0.0, abs=1e-12)
    for keep in (["a"], ["b", "d"]):
        np.testing.assert_allclose(fs.reduced_density(keep).matrix, reduced_density(sv, keep).matrix, atol=1e-12)


def test_factored_measurement_collapses():
    fs = FactoredState.from_basis(("a", "b"), {"a": 0, "b": 0}).apply(H, ["a"]).apply(CNOT, ["a", "b"])
    outs = fs.measure(["a"])
    assert sorted(o for o, _, _ in outs) == [(0,), (1,)]
    for o, p, post in outs:
        assert p == pytest.approx(0.5)
        assert "a" in post.classical
        assert post.probabilities(["b"]) == {o: pytest.approx(1.0)}


def test_classical_controls_stay_classical():
    fs = FactoredState.from_basis(("c", "t"), {"c": 1, "t": 0}).apply(CNOT, ["c", "t"])
    assert fs.n_active == 0
    assert fs.classical["t"] == 1
