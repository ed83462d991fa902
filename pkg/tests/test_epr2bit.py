import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcomm.epr2bit import (
    A_MATRICES,
    B_MATRICES,
    INPUTS2,
    MATRIX_PROVENANCE,
    Q_CODEBOOK,
    ClassicalProtocolTree,
    build_entangled_2bit,
    build_qubit_2bit,
    build_three_bit_classical,
    enumerate_classical_2bit,
    ip2,
    partner_state,
    pi_distribution,
    point_distribution,
    preparation_unitary,
    uniform_distribution,
    verify_two_bit_claims,
    write_scores_csv,
)
from qcomm.protovm import execute, success_report
from qcomm.qcore import StateVector, apply_unitary, is_unitary

s = np.sqrt

# Printed codebook, transcribed term by term; Q_11 carries the printed sign.
PRINTED_Q = {
    (0, 0): [s(2 / 5), -1j * s(3 / 5)],
    (0, 1): [s(4 / 5), s(3 / 16) + 1j * s(1 / 80)],
    (1, 0): [s(4 / 5), -s(3 / 16) + 1j * s(1 / 80)],
    (1, 1): [s(1 / 5), -1j * s(4 / 5)],
}


def test_matrices_are_unitary_and_documented():
    for k, u in {**{f"A_{a}{b}": m for (a, b), m in A_MATRICES.items()},
                 **{f"B_{a}{b}": m for (a, b), m in B_MATRICES.items()}}.items():
        assert is_unitary(u.matrix)
        assert u.name == k
        assert k in MATRIX_PROVENANCE
    assert (0, 0) not in B_MATRICES


def test_codebook_is_row_zero_of_a():
    for x in INPUTS2:
        np.testing.assert_allclose(Q_CODEBOOK[x].amplitudes, A_MATRICES[x].matrix[0])
        np.testing.assert_allclose(preparation_unitary(x).matrix[:, 0], Q_CODEBOOK[x].amplitudes)


def test_codebook_agrees_with_printed_table_except_q11_sign():
    for x in [(0, 0), (0, 1), (1, 0)]:
        np.testing.assert_allclose(Q_CODEBOOK[x].amplitudes, PRINTED_Q[x], atol=1e-15)
    q11 = Q_CODEBOOK[(1, 1)].amplitudes
    np.testing.assert_allclose(q11, [s(1 / 5), 1j * s(4 / 5)], atol=1e-15)


def test_printed_q11_sign_breaks_the_bound():
    # with the printed sign, sender x=11 meets receiver y=01 with success 8/25, so the pair
    # averages (8/25 + 4/5) / 2 = 0.56 over the coin
    for y in [(0, 1), (1, 0)]:
        good = np.abs(B_MATRICES[y].matrix @ Q_CODEBOOK[(1, 1)].amplitudes)[ip2((1, 1), y)] ** 2
        bad = np.abs(B_MATRICES[y].matrix @ np.array(PRINTED_Q[(1, 1)]))[ip2((1, 1), y)] ** 2
        assert good == pytest.approx(0.8)
        assert bad == pytest.approx(0.32)
        assert (bad + 0.8) / 2 == pytest.approx(0.56)


def test_partner_state_outcome_one_is_row_one():
    for x in INPUTS2:
        np.testing.assert_allclose(partner_state(A_MATRICES[x], 1).amplitudes, A_MATRICES[x].matrix[1])


def _oracle_pair(x, y):
    """Closed-form success of a coin-averaged round: receiver with 00 is always right."""
    def one_way(snd, rcv):
        if rcv == (0, 0):
            return 1.0
        amp = B_MATRICES[rcv].matrix @ np.array(PRINTED_Q[snd] if snd != (1, 1) else [s(1 / 5), 1j * s(4 / 5)])
        return float(np.abs(amp[ip2(snd, rcv)]) ** 2)
    return (one_way(x, y) + one_way(y, x)) / 2


@pytest.mark.parametrize("build", [build_entangled_2bit, build_qubit_2bit,
                                   lambda: build_entangled_2bit("epr"), lambda: build_qubit_2bit("bit")])
def test_success_table_matches_oracle(build):
    rep = success_report(build(), ip2)
    for (x, y), p in rep.per_pair.items():
        assert p == pytest.approx(_oracle_pair(x, y), abs=1e-12)
    assert rep.minimum >= 0.8 - 1e-9


def test_frozen_success_values():
    rep = success_report(build_entangled_2bit(), ip2)
    assert rep.per_pair[((0, 0), (0, 0))] == pytest.approx(1.0)
    assert rep.per_pair[((0, 0), (0, 1))] == pytest.approx(0.8869693845669908, abs=1e-12)
    assert rep.per_pair[((1, 1), (1, 1))] == pytest.approx(0.8, abs=1e-12)
    assert rep.minimum == pytest.approx(0.8, abs=1e-12)


def test_communication_per_branch():
    for x in INPUTS2:
        for y in INPUTS2:
            for c in execute(build_entangled_2bit(), x, y).ledger.per_branch:
                assert (c["bits_AB"] + c["bits_BA"], c["n_AB"] + c["n_BA"]) == (2, 0)
            for c in execute(build_qubit_2bit(), x, y).ledger.per_branch:
                assert (c["bits_AB"] + c["bits_BA"], c["n_AB"] + c["n_BA"]) == (0, 2)
            for c in execute(build_qubit_2bit("bit"), x, y).ledger.per_branch:
                assert (c["bits_AB"] + c["bits_BA"], c["n_AB"] + c["n_BA"]) == (1, 1)


def test_unknown_modes():
    with pytest.raises(ValueError):
        build_entangled_2bit("dice")
    with pytest.raises(ValueError):
        build_qubit_2bit("maybe")
    with pytest.raises(ValueError):
        enumerate_classical_2bit(output_mode="oracle")


def test_pi_distribution():
    pi = pi_distribution()
    assert sum(pi.values()) == 1
    assert sum(1 for w in pi.values() if w) == 9
    assert sum(w for (x, y), w in pi.items() if ip2(x, y)) == Fraction(6, 9)


def test_classical_enumeration_is_seven_ninths():
    res = enumerate_classical_2bit(pi_distribution())
    assert res.max_success == Fraction(7, 9)
    assert res.trees == 524288
    assert res.argmax.score(pi_distribution()) == Fraction(7, 9)
    assert res.argmax == ClassicalProtocolTree("A", 2, ("A", "B"), (0, 4), 5)


def test_classical_bound_below_quantum():
    assert Fraction(7, 9) < Fraction(4, 5)


def test_receiver_mode_solves_the_problem():
    # letting the last receiver use its own input makes two bits enough
    res = enumerate_classical_2bit(pi_distribution(), output_mode="receiver")
    assert res.max_success == 1
    for (x, y), w in pi_distribution().items():
        if w:
            assert res.argmax.run(x, y)[1] == ip2(x, y)


@given(st.integers(0, 524287))
def test_tree_id_roundtrip(tid):
    tree = ClassicalProtocolTree.from_id(tid)
    assert tree.tree_id == tid


@given(st.integers(0, 524287))
def test_tree_program_agrees_with_tree(tid):
    tree = ClassicalProtocolTree.from_id(tid)
    prog = tree.to_program()
    for x in INPUTS2:
        for y in [(0, 1), (1, 1)]:
            out = execute(prog, x, y)
            assert out.probability_of(tree.run(x, y)[1]) == 1.0
            assert out.ledger.bits == 2


def test_point_distribution_enumeration():
    res = enumerate_classical_2bit(point_distribution((1, 1), (1, 0)))
    assert res.max_success == 1


def test_uniform_distribution_bound():
    # the all-zero output is right on 10 of 16 pairs; two bits buy more
    res = enumerate_classical_2bit(uniform_distribution())
    assert Fraction(10, 16) < res.max_success < 1


def test_scores_csv_header_and_rows():
    buf = io.StringIO()
    write_scores_csv(pi_distribution(), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "tree_id,num,den"
    assert len(lines) == 524289


def test_three_bits_suffice():
    prog = build_three_bit_classical()
    assert success_report(prog, ip2).minimum == 1.0
    assert execute(prog, (1, 0), (1, 1)).ledger.bits == 3


def test_two_bit_summary():
    out = verify_two_bit_claims()
    assert out["quantum_ok"] and out["classical_ok"] and out["three_bit_ok"]


def test_a11_on_first_qubit_of_00():
    out = apply_unitary(StateVector.basis(("a", "b"), (0, 0)), A_MATRICES[(1, 1)], ["a"])
    np.testing.assert_allclose(out.amplitudes, [s(1 / 5), 0, 1j * s(4 / 5), 0], atol=1e-15)
