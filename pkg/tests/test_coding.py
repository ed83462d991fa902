import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcomm.coding import (
    CapacitySpec,
    InfeasibleSpec,
    build_capacity_protocol,
    build_superdense,
    superdense_transmission,
    teleport_simulate,
)
from qcomm.epr2bit import build_qubit_2bit
from qcomm.ipproto import build_classical_ip, build_exact_ip
from qcomm.protovm import ProtocolError, SendBit, all_inputs, execute, walk


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_superdense_exact(n):
    prog = build_superdense(n)
    for x in all_inputs(n):
        out = execute(prog, x)
        assert out.probability_of(x) == pytest.approx(1.0, abs=1e-12)
    assert out.ledger.n_AB == (n + 1) // 2
    assert out.ledger.n_BA == 0
    assert out.ledger.prior_epr == n // 2


def test_superdense_layout_names():
    lay = superdense_transmission(["a", "b", "c"])
    assert lay.epr_pairs == (("sd0_a", "sd0_b"),)
    assert lay.decoded == ("sd0_a", "sd0_b", "sd_last")


@pytest.mark.parametrize("spec,ok", [
    ((3, 2, 1), True), ((3, 1, 2), False), ((4, 2, 1), False), ((4, 2, 2), True),
    ((1, 0, 1), False), ((1, 1, 0), True), ((0, 0, 0), True), ((6, 3, 3), True), ((6, 6, 0), True),
])
def test_capacity_region(spec, ok):
    s = CapacitySpec(*spec)
    assert s.feasible is ok
    if not ok:
        with pytest.raises(InfeasibleSpec):
            build_capacity_protocol(s)


def test_capacity_violation_messages():
    msgs = CapacitySpec(4, 1, 2).violations()
    assert any("ceil(n/2)" in m for m in msgs)
    assert any("n_AB + n_BA >= n" in m for m in msgs)


def test_capacity_spec_validation():
    with pytest.raises(ValueError):
        CapacitySpec(-1, 0, 0)
    with pytest.raises(ValueError):
        CapacitySpec(2, 1.5, 1)


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers((n + 1) // 2, n + 1),
                                                      st.integers(0, n + 1))))
def test_capacity_ledger_is_exact(spec):
    n, n_ab, n_ba = spec
    s = CapacitySpec(n, n_ab, n_ba)
    if not s.feasible:
        return
    prog = build_capacity_protocol(s)
    x = tuple((i * 7 + n) % 2 for i in range(n))
    out = execute(prog, x)
    assert out.probability_of(x) == pytest.approx(1.0, abs=1e-12)
    assert (out.ledger.n_AB, out.ledger.n_BA, out.ledger.prior_epr) == (n_ab, n_ba, 0)


@pytest.mark.parametrize("prog", [build_superdense(3), build_exact_ip(2), build_qubit_2bit(),
                                  build_capacity_protocol(CapacitySpec(3, 2, 2))], ids=lambda p: p.name)
def test_teleportation_preserves_distribution(prog):
    tp = teleport_simulate(prog)
    assert not any(isinstance(s, type(None)) for s in walk(tp.steps))
    for x in all_inputs(prog.n_alice_input_bits):
        for y in all_inputs(prog.n_bob_input_bits):
            a, b = execute(prog, x, y), execute(tp, x, y)
            keys = set(a.output_distribution) | set(b.output_distribution)
            for k in keys:
                assert a.output_distribution.get(k, 0) == pytest.approx(b.output_distribution.get(k, 0), abs=1e-12)
            assert b.ledger.qubits == 0
            assert b.ledger.bits_AB == 2 * a.ledger.n_AB
            assert b.ledger.bits_BA == 2 * a.ledger.n_BA


def test_teleportation_needs_qubit_protocol():
    with pytest.raises(ProtocolError):
        teleport_simulate(build_classical_ip(1))
    tp = teleport_simulate(build_superdense(2))
    assert sum(isinstance(s, SendBit) for s in walk(tp.steps)) == 2
    assert tp.prior_entanglement == 2
