import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iotstab import coupling, qbd, sgeom
from iotstab.coupling import FixedPointConfig, fixed_point
from iotstab.scenario import NetworkScenario, SchemeConfig

CFG = FixedPointConfig()


def test_fixed_point_identity_and_constant():
    res = fixed_point(lambda x: x, [0.3], CFG)
    assert res.converged and res.iterations == 1
    res = fixed_point(lambda x: np.array([0.7]), [0.3], CFG)
    assert res.converged and res.iterations == 2 and res.value[0] == 0.7


def test_fixed_point_damping_rescues_two_cycle():
    res = fixed_point(lambda x: 1.0 - x, [0.2], CFG)
    assert res.converged and res.damping == 0.5
    assert res.value[0] == pytest.approx(0.5)


def test_fixed_point_reports_persistent_oscillation():
    # jumps of +-1 keep a two-cycle alive under any damping of 1/2 or more
    res = fixed_point(lambda x: np.where(x < 0.5, x + 1.0, x - 1.0), [0.1], FixedPointConfig(window=5))
    assert res.oscillating and not res.converged
    assert res.damping == 0.5


def test_zero_arrivals():
    s = NetworkScenario.reference_defaults(arrival_prob=0.0)
    for scheme in (SchemeConfig.baseline(), SchemeConfig.ramping(), SchemeConfig.backoff(2, 0.5)):
        res = coupling.solve(s, scheme)
        assert res.stable and res.x0 == 1.0 and res.mean_queue == 0.0
        assert np.all(res.Pi == 0.0)


def test_no_interference_closed_form():
    s = NetworkScenario.reference_defaults(alpha_tilde=0.0, theta_db=5.0, arrival_prob=0.05)
    p = math.exp(-s.noise * s.sinr_threshold / s.power_threshold)
    res = coupling.solve_baseline(s)
    assert res.p == pytest.approx(p, rel=1e-15)
    assert res.stable == (p > s.arrival_prob)
    res = coupling.solve_baseline(s.replace(arrival_prob=0.5))
    assert not res.stable and res.x0 == 0.0


def test_defaults_stable_and_self_consistent():
    s = NetworkScenario.reference_defaults()
    res = coupling.solve_baseline(s)
    assert res.stable and res.converged
    assert res.x0 == pytest.approx((res.p - 0.1) / res.p, abs=1e-7)
    assert res.p == pytest.approx(sgeom.success_baseline(s, 1 - res.x0), abs=1e-7)
    # frozen from the closed-form Geo/Geo/1 solution at the fixed point
    assert res.p == pytest.approx(0.8264570720134343, abs=1e-7)
    assert res.mean_queue == pytest.approx(0.1 * 0.9 * res.p * res.x0 / (res.p - 0.1) ** 2, rel=1e-12)


@given(at=st.floats(0.1, 10.0), th=st.floats(-20.0, 0.0), a=st.floats(0.01, 0.5))
@settings(max_examples=15, deadline=None)
def test_reductions_exact(at, th, a):
    s = NetworkScenario.reference_defaults(alpha_tilde=at, theta_db=th, arrival_prob=a)
    ref = coupling.solve(s, SchemeConfig.baseline(), metrics=False)
    for scheme in (SchemeConfig.backoff(0, 1.0), SchemeConfig.ramping((s.power_threshold,))):
        other = coupling.solve(s, scheme, metrics=False)
        assert other.stable == ref.stable
        for u, v in ((ref.x0, other.x0), (ref.p, other.p), (ref.delay, other.delay)):
            assert abs(u - v) <= 1e-12


def test_ramping_self_consistent():
    s = NetworkScenario.reference_defaults()
    res = coupling.solve(s, SchemeConfig.ramping())
    assert res.stable
    np.testing.assert_allclose(res.success, sgeom.success_ramping_all(s, res.Pi), atol=1e-7)
    sol = qbd.solve_qbd(qbd.build_ph(SchemeConfig.ramping(), res.success), 0.1)
    np.testing.assert_allclose(sol.Pi, res.Pi, atol=1e-7)


def test_table_unstable_backoff_rows():
    s = NetworkScenario.reference_defaults(alpha_tilde=8.0, theta_db=-6.0)
    res = coupling.solve(s, SchemeConfig.backoff(2, 0.87))
    assert not res.stable and res.x0 == 0.0 and math.isfinite(res.delay)
    assert res.mean_queue is None
    # saturated devices transmit with the drift-vector probability
    pi = qbd.drift_vector(qbd.build_ph(SchemeConfig.backoff(2, 0.87), res.success[:1]))
    assert res.Pi == pytest.approx(pi)
    assert res.p == pytest.approx(sgeom.success_backoff(s, pi[0]), abs=1e-7)


def test_as_dict_keys():
    d = coupling.solve_baseline(NetworkScenario.reference_defaults()).as_dict()
    assert {"stable", "p", "x0", "E_QL", "E_Wq", "D"} <= set(d)


def test_config_validation():
    with pytest.raises(ValueError):
        FixedPointConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        FixedPointConfig(damping=1.5)
