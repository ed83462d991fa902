import io
from fractions import Fraction
from math import cos, log2, pi

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from qcomm.coding import CapacitySpec, build_capacity_protocol, build_superdense
from qcomm.infobounds import (
    ChiRecord,
    ChiTrace,
    Ensemble,
    assert_step_bounds,
    average_over_y,
    chi_trace,
    check_program,
    entropy_bits,
    holevo_chi,
    mutual_information,
    uniform,
)
from qcomm.ipproto import binary_entropy, build_exact_ip, make_clean
from qcomm.protovm import Ledger, ProtocolError, execute
from qcomm.qcore import QCoreError, StateVector


def _pure(amps):
    return StateVector(("q",), np.array(amps, dtype=complex)).density()


def test_holevo_orthogonal_and_overlapping():
    ens = Ensemble(((0.5, _pure([1, 0])), (0.5, _pure([0, 1]))))
    assert holevo_chi(ens) == pytest.approx(1.0)
    plus = _pure([2**-0.5, 2**-0.5])
    ens = Ensemble(((0.5, _pure([1, 0])), (0.5, plus)))
    # eigenvalues of the average are cos^2(pi/8) and sin^2(pi/8)
    assert holevo_chi(ens) == pytest.approx(binary_entropy(cos(pi / 8) ** 2), abs=1e-12)
    assert holevo_chi(ens) == pytest.approx(0.6008760366928562, abs=1e-12)


def test_ensemble_validation():
    with pytest.raises(QCoreError):
        Ensemble(())
    with pytest.raises(QCoreError):
        Ensemble(((0.5, _pure([1, 0])),))
    two = StateVector(("a", "b"), np.array([1, 0, 0, 0])).density()
    with pytest.raises(QCoreError):
        Ensemble(((0.5, _pure([1, 0])), (0.5, two)))
    Ensemble(((Fraction(1, 3), _pure([1, 0])), (Fraction(2, 3), _pure([0, 1]))))


@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_holevo_between_zero_and_entropy(seed, m):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(m))
    members = tuple((float(pi_), StateVector(("a", "b"), random_state(2, rng)).density()) for pi_ in p)
    members = ((members[0][0] + 1 - sum(q for q, _ in members), members[0][1]),) + members[1:]
    chi = holevo_chi(Ensemble(members))
    assert -1e-9 <= chi <= min(2, entropy_bits(p)) + 1e-9


def test_mutual_information():
    assert mutual_information({(0, 0): 0.5, (1, 1): 0.5}) == pytest.approx(1.0)
    indep = {(a, b): 0.25 for a in (0, 1) for b in (0, 1)}
    assert mutual_information(indep) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        mutual_information({(0, 0): 0.7})
    with pytest.raises(ValueError):
        mutual_information({(0, 0): 1.2, (1, 1): -0.2})


def test_entropy_bits():
    assert entropy_bits([0.5, 0.5, 0]) == 1.0
    assert entropy_bits([0.25] * 4) == 2.0


@pytest.mark.parametrize("n", [2, 4])
def test_superdense_saturates(n):
    trace, verdict = check_program(build_superdense(n))
    assert verdict.ok, verdict.violations
    assert trace.final_chi == pytest.approx(n, abs=1e-7)
    assert verdict.chi_bound == n
    assert trace.mutual_info == pytest.approx(n, abs=1e-7)


def test_odd_superdense_reaches_input_entropy():
    trace, verdict = check_program(build_superdense(3))
    assert verdict.ok
    assert trace.final_chi == pytest.approx(3.0, abs=1e-7)
    assert verdict.chi_bound == 3


def test_trace_kinds_and_setup():
    trace = chi_trace(build_superdense(2))
    kinds = [r.kind for r in trace.records]
    assert kinds[0] == "init" and kinds[1] == "setup"
    assert kinds.count("send-AB") == 1
    # Bob holding both EPR halves: pure, S = 0; after the hand-over, S = 1
    assert trace.records[0].S == pytest.approx(0.0, abs=1e-9)
    assert trace.records[1].S == pytest.approx(1.0)


@pytest.mark.parametrize("prog", [build_exact_ip(3), make_clean(build_exact_ip(2)),
                                  build_capacity_protocol(CapacitySpec(4, 2, 2))], ids=lambda p: p.name)
def test_builtins_respect_step_bounds(prog):
    y = (1,) * prog.n_bob_input_bits
    _, verdict = check_program(prog, y)
    assert verdict.ok, verdict.violations


def test_capacity_bound_uses_both_directions():
    prog = build_capacity_protocol(CapacitySpec(4, 2, 2))
    trace, verdict = check_program(prog)
    assert verdict.chi_bound == 4
    assert trace.final_chi == pytest.approx(4.0, abs=1e-7)


def test_violation_is_reported():
    recs = [ChiRecord(0, "init", 0.0, 0.0), ChiRecord(1, "send-AB", 1.0, 1.0), ChiRecord(2, "unitary-B", 1.0, 1.5)]
    verdict = assert_step_bounds(ChiTrace("fake", (), recs), Ledger(n_AB=1))
    assert not verdict.ok
    assert any("unitary-B" in v for v in verdict.violations)
    assert any("exceeds S" in v for v in verdict.violations)


def test_send_ba_cannot_raise_chi():
    recs = [ChiRecord(0, "init", 0.0, 0.0), ChiRecord(1, "send-BA", 1.0, 0.5)]
    verdict = assert_step_bounds(ChiTrace("fake", (), recs), Ledger(n_BA=1))
    assert not verdict.ok


def test_trace_ledger_mismatch_raises():
    trace = chi_trace(build_superdense(2))
    with pytest.raises(ProtocolError):
        assert_step_bounds(trace, Ledger(n_AB=2))


def test_average_over_y_and_csv():
    prog = build_exact_ip(2)
    avg = average_over_y(prog)
    assert len(avg.records) == len(chi_trace(prog, None, (0, 0)).records)
    buf = io.StringIO()
    avg.to_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "step,kind,S,chi"
    assert len(rows) == len(avg.records) + 1


def test_nonuniform_input_distribution():
    dist = {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}
    trace = chi_trace(build_superdense(2), dist)
    assert trace.final_chi == pytest.approx(1.0, abs=1e-9)
    assert sum(uniform(3).values()) == 1


def test_mutual_information_bounded_by_chi_exact_ip():
    trace = chi_trace(build_exact_ip(2), None, (1, 1))
    assert trace.mutual_info <= trace.final_chi + 1e-7
    # Bob ends up holding x itself: both are 2 bits
    assert trace.mutual_info == pytest.approx(2.0, abs=1e-7)
    assert execute(build_exact_ip(2), (1, 1), (1, 1)).ledger.n_AB == 1
    assert log2(4) == 2
