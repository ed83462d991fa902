from math import sin, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcomm.ipproto import (
    binary_entropy,
    build_classical_ip,
    build_constant,
    build_exact_ip,
    build_noisy_exact_ip,
    classical_clean_view,
    clean_residual,
    epsilon_of,
    fano_bound,
    interleave_to_qubits,
    ip,
    make_clean,
    protect_bob_inputs,
    reduction_attack,
)
from qcomm.protovm import ProtocolError, all_inputs, execute, success_report


def test_ip_values():
    assert ip((1, 1), (1, 0)) == 1
    assert ip((1, 1), (1, 1)) == 0
    assert ip((1, 0, 1), (1, 1, 1)) == 0


@pytest.mark.parametrize("n", range(1, 9))
def test_exact_ip_ledger(n):
    led = execute(build_exact_ip(n), (1,) * n, (1,) * n).ledger
    assert (led.n_AB, led.n_BA, led.bits) == ((n + 1) // 2, 0, 0)


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.tuples(*[st.integers(0, 1)] * n),
                                                      st.tuples(*[st.integers(0, 1)] * n))))
def test_exact_ip_random_pairs(xy):
    x, y = xy
    assert execute(build_exact_ip(len(x)), x, y).probability_of(ip(x, y)) == pytest.approx(1.0, abs=1e-12)


def test_noisy_error_is_sin_squared():
    prof = epsilon_of(build_noisy_exact_ip(2, 0.3))
    for v in prof.per_pair.values():
        assert v == pytest.approx(sin(0.3) ** 2, abs=1e-12)
    with pytest.raises(ValueError):
        build_noisy_exact_ip(2, 1.0)


def test_constant_protocol_error():
    prof = epsilon_of(build_constant(2, 0))
    assert prof.epsilon == 1.0
    assert prof.mean == pytest.approx(6 / 16)


def test_binary_entropy_and_fano():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    # (1 - 2 * 0.25)^2 = 0.25: fano = 0.25 * 8 - h(0.25)
    assert fano_bound(0.25, 8) == pytest.approx(2 - 0.8112781244591328, abs=1e-12)
    assert fano_bound(0.0, 5) == 5.0
    with pytest.raises(ValueError):
        fano_bound(0.5, 3)


@given(st.floats(0, 0.4999), st.integers(1, 64))
def test_fano_bound_dominates_linear_bound(eps, n):
    assert fano_bound(eps, n) >= (1 - 2 * eps) ** 2 * n - 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_clean_form_exhaustive(n):
    clean = make_clean(build_exact_ip(n))
    assert clean.bob_inputs[0] == "z"
    for x in all_inputs(n):
        for y in all_inputs(n):
            for z in (0, 1):
                d, owners = clean_residual(clean, x, y, z)
                assert d < 1e-12 and owners


def test_clean_form_communication_doubles():
    prog = build_exact_ip(3)
    led = execute(make_clean(prog), (1, 0, 1), (0, 1, 1, 0)).ledger
    assert (led.n_AB, led.n_BA) == (2, 2)


def test_clean_requires_unitary_protocol():
    with pytest.raises(ProtocolError):
        make_clean(build_classical_ip(2))
    with pytest.raises(ProtocolError):
        make_clean(build_exact_ip(2), answer="out")


def test_input_protection_is_skipped_when_inputs_are_controls():
    prog = build_exact_ip(2)
    assert protect_bob_inputs(prog) is prog


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_attack_recovers_x(n):
    clean = make_clean(build_exact_ip(n))
    for x in all_inputs(n):
        rep = reduction_attack(clean, x)
        assert rep.probability == pytest.approx(1.0, abs=1e-9)
        assert rep.euclidean_gap < 1e-9
        assert rep.cos_theta == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("theta", [0.1, 0.25, 0.4])
def test_noisy_attack_bounds(theta):
    eps = sin(theta) ** 2
    clean = make_clean(build_noisy_exact_ip(2, theta))
    for x in all_inputs(2):
        rep = reduction_attack(clean, x, epsilon=eps)
        assert rep.probability >= (1 - 2 * eps) ** 2 - 1e-9
        assert rep.euclidean_gap <= 2 * sqrt(eps) + 1e-9
        assert rep.cos_theta ** 2 >= (1 - 2 * eps) ** 2 - 1e-9
        assert rep.mutual_info_bound == pytest.approx(fano_bound(eps, 2))


def test_attack_input_size_mismatch():
    with pytest.raises(ProtocolError):
        reduction_attack(make_clean(build_exact_ip(2)), (1, 0, 1))


def test_classical_clean_view_depends_on_x_only_through_ip():
    # Bob's registers, sorted by label: out, y0, y1, z
    for y in all_inputs(2):
        for z in (0, 1):
            view = classical_clean_view(2, y, z=z)
            for x, regs in view.items():
                assert regs == (0,) + y + ((z + ip(x, y)) % 2,)


def test_interleave_exact():
    q = interleave_to_qubits(build_classical_ip(1))
    rep = success_report(q, ip)
    assert len(rep.per_pair) == 16 and rep.minimum == pytest.approx(1.0)
    led = execute(q, (1, 1), (1, 1)).ledger
    assert (led.qubits, led.bits, led.prior_epr) == (1, 0, 1)


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_interleave_noisy_error(eps):
    prof = epsilon_of(interleave_to_qubits(build_classical_ip(1, eps)))
    np.testing.assert_allclose(list(prof.per_pair.values()), 2 * eps * (1 - eps), atol=1e-12)


def test_interleave_two_bit_messages():
    q = interleave_to_qubits(build_classical_ip(2))
    assert success_report(q, ip).minimum == pytest.approx(1.0)
    assert execute(q, (0,) * 4, (0,) * 4).ledger.n_AB == 2


def test_interleave_rejects_qubit_protocol():
    with pytest.raises(ProtocolError):
        interleave_to_qubits(build_exact_ip(2))
