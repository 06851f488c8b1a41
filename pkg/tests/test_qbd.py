import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iotstab import qbd
from iotstab.scenario import SchemeConfig
from iotstab.verify import random_ph
from oracles import truncated_chain, waiting_mean_closed

BASE = SchemeConfig.baseline()


def baseline(p):
    return qbd.build_ph(BASE, [p])


def ramp2(p1=0.4, p2=0.7):
    return qbd.build_ph(SchemeConfig.ramping((1.0, 2.0)), [p1, p2])


def absorption_law(ph, horizon=400):
    out, v = [], ph.beta.copy()
    for _ in range(horizon):
        out.append(v @ ph.s)
        v = v @ ph.S
    return np.array(out)


def test_baseline_structure():
    ph = baseline(0.5)
    assert ph.S.tolist() == [[0.5]] and ph.s.tolist() == [0.5]


def test_backoff_n0_q1_same_absorption_law():
    ph = qbd.build_ph(SchemeConfig.backoff(0, 1.0), [0.5])
    np.testing.assert_array_equal(absorption_law(ph), absorption_law(baseline(0.5)))


def test_ramping_structure():
    np.testing.assert_allclose(ramp2().S, [[0.0, 0.6], [0.3, 0.0]], rtol=0, atol=1e-16)
    # absorption within one cycle: 0.4 + 0.6 * 0.7
    ph = ramp2()
    first_two = absorption_law(ph, 2)
    assert first_two.tolist() == pytest.approx([0.4, 0.6 * 0.7])


def test_backoff_structure_general():
    ph = qbd.build_ph(SchemeConfig.backoff(2, 0.3), [0.6])
    S = ph.S
    assert S[0, 1] == pytest.approx(0.4) and S[1, 2] == 1.0
    assert S[2, 0] == pytest.approx(0.3) and S[2, 3] == pytest.approx(0.7)
    assert S[3, 0] == pytest.approx(0.3) and S[3, 3] == pytest.approx(0.7)
    assert ph.transmit.tolist() == [True, False, False, False]
    assert qbd.mean_backoff_per_failure(ph) == pytest.approx(2 - 1 + 1 / 0.3)


@pytest.mark.parametrize("n,q", [(0, 0.5), (1, 0.25), (4, 0.29), (3, 1.0)])
def test_mean_backoff_formula(n, q):
    ph = qbd.build_ph(SchemeConfig.backoff(n, q), [0.5])
    expected = (1 - q) / q if n == 0 else n - 1 + 1 / q
    assert qbd.mean_backoff_per_failure(ph) == pytest.approx(expected, rel=1e-12)


def test_drift_vectors():
    assert qbd.drift_vector(baseline(0.3)).tolist() == [1.0]
    np.testing.assert_allclose(qbd.drift_vector(ramp2()), [1 / 1.6, 0.6 / 1.6], rtol=1e-14)
    pi = qbd.drift_vector(qbd.build_ph(SchemeConfig.backoff(1, 0.5), [0.5]))
    assert pi[0] == pytest.approx(0.5, rel=1e-14)
    np.testing.assert_allclose(qbd.unstable_phases(ramp2(1.0, 1.0)), [1.0, 0.0], atol=1e-15)


def test_stability_rules():
    assert qbd.is_stable(baseline(0.5), 0.1)[0]
    assert not qbd.is_stable(baseline(0.1), 0.1)[0]
    assert qbd.is_stable(baseline(0.0), 0.0)[0]
    assert not qbd.is_stable(baseline(0.99), 1.0)[0]


def test_baseline_r_and_idle():
    p, a = 0.5, 0.1
    sol = qbd.solve_qbd(baseline(p), a)
    assert sol.R[0, 0] == pytest.approx(a * (1 - p) / ((1 - a) * p), rel=1e-14)
    assert sol.x0 == pytest.approx((p - a) / p, rel=1e-14)
    assert sol.Pi[0] == pytest.approx(1 - sol.x0, rel=1e-14)
    assert qbd.mean_queue_length(sol) == pytest.approx(0.225, rel=1e-13)
    assert qbd.mean_waiting_time(sol) == pytest.approx(0.45, rel=1e-12)


def test_zero_arrivals():
    sol = qbd.solve_qbd(ramp2(), 0.0)
    assert sol.x0 == 1.0
    assert np.all(sol.R == 0.0)
    np.testing.assert_array_equal(sol.Pi, [0.0, 0.0])
    assert qbd.mean_queue_length(sol) == 0.0
    assert qbd.mean_waiting_time(sol) == 0.0


def test_ramping_r_iteration_and_truncated_oracle():
    ph, a = ramp2(), 0.1
    blocks = qbd.qbd_blocks(ph, a)
    np.testing.assert_allclose(qbd.solve_r_matrix(blocks), qbd.iterate_r_matrix(blocks), atol=1e-12)
    sol = qbd.solve_qbd(ph, a)
    x0, X = truncated_chain(ph.S, ph.beta, a)
    assert abs(sol.x0 - x0) < 1e-8
    np.testing.assert_allclose(sol.Pi, X.sum(axis=0), atol=1e-8)


def test_unstable_solution_is_saturated():
    sol = qbd.solve_qbd(baseline(0.05), 0.1)
    assert not sol.stable and sol.x0 == 0.0 and sol.Pi.tolist() == [1.0]
    with pytest.raises(qbd.QbdError):
        qbd.mean_queue_length(sol)


def test_service_delay_examples():
    assert qbd.mean_service_delay([0.8], 0.2, [0.5]) == pytest.approx((2.0, 0.5))
    assert qbd.mean_service_delay([0.3], 0.7, [1.0])[0] == pytest.approx(1.0)


def test_validation():
    with pytest.raises(qbd.QbdError):
        qbd.PhService(np.ones(1), np.array([[1.2]]), np.zeros(1))
    with pytest.raises(qbd.QbdError):
        qbd.PhService(np.array([0.5, 0.4]), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(qbd.QbdError):
        qbd.build_ph(BASE, [0.3, 0.4])
    with pytest.raises(qbd.QbdError):
        qbd.build_ph(BASE, [1.3])


ph_cases = st.tuples(st.integers(0, 2**32 - 1), st.integers(1, 5), st.floats(0.01, 0.9))


def _stable_case(seed, n, a):
    ph = random_ph(np.random.default_rng(seed), n)
    ok, down, up = qbd.is_stable(ph, a)
    # keep the tail short enough for a 200-level cut
    return ph, ok and up / down < 0.8


@given(ph_cases)
@settings(max_examples=40, deadline=None)
def test_random_ph_against_truncated_chain(case):
    ph, ok = _stable_case(*case)
    a = case[2]
    if not ok:
        return
    sol = qbd.solve_qbd(ph, a)
    x0, X = truncated_chain(ph.S, ph.beta, a)
    assert abs(sol.x0 - x0) < 1e-8
    np.testing.assert_allclose(sol.Pi, X.sum(axis=0), atol=1e-8)
    eq = float((np.arange(1, 201) * X.sum(axis=1)).sum())
    assert qbd.mean_queue_length(sol) == pytest.approx(eq, abs=1e-6)


@given(ph_cases)
@settings(max_examples=40, deadline=None)
def test_random_ph_waiting_time(case):
    ph, ok = _stable_case(*case)
    a = case[2]
    if not ok:
        return
    sol = qbd.solve_qbd(ph, a)
    eq = qbd.mean_queue_length(sol)
    expected = waiting_mean_closed(ph.S, ph.beta, sol.x0, sol.Pi, eq)
    assert qbd.mean_waiting_time(sol) == pytest.approx(expected, rel=1e-9, abs=1e-12)
    pmf = qbd.waiting_time_pmf(sol)
    assert pmf[0] == pytest.approx(sol.x0)
    assert 1 - 1e-10 < pmf.sum() <= 1 + 1e-12


@given(ph_cases)
@settings(max_examples=40, deadline=None)
def test_random_ph_r_matrix(case):
    seed, n, a = case
    ph = random_ph(np.random.default_rng(seed), n)
    if not qbd.is_stable(ph, a)[0]:
        return
    blocks = qbd.qbd_blocks(ph, a)
    R = qbd.solve_r_matrix(blocks)
    resid = blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2 - R
    assert np.max(np.abs(resid)) < 1e-12
    assert np.max(np.abs(np.linalg.eigvals(R))) < 1.0
    sol = qbd.solve_qbd(ph, a)
    assert sol.x0 + sol.Pi.sum() == pytest.approx(1.0, abs=1e-12)
