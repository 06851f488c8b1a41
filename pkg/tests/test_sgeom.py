import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iotstab import sgeom
from iotstab.scenario import NetworkScenario, SchemeConfig
from oracles import negbin_lt_sum, success_by_quadrature
from scipy import integrate

# frozen from the quadrature oracle (tests/oracles.py)
FROZEN = [
    (4.0, -10.0, 1.0, 0.4344294620619161),
    (1.0, -10.0, 0.1, 0.8880167169412049),
    (8.0, -2.0, 0.5, 0.01742907609685732),
]


@pytest.mark.parametrize("at,th,busy,expected", FROZEN)
def test_baseline_frozen(at, th, busy, expected):
    s = NetworkScenario.reference_defaults(alpha_tilde=at, theta_db=th)
    assert sgeom.success_baseline(s, busy) == pytest.approx(expected, rel=1e-9)


@given(at=st.floats(0.0, 10.0), th=st.floats(-20.0, 5.0), busy=st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_baseline_matches_quadrature(at, th, busy):
    s = NetworkScenario.reference_defaults(alpha_tilde=at, theta_db=th)
    load = busy * at
    ref = success_by_quadrature(s.noise, s.power_threshold, s.sinr_threshold, 4.0, load, load)
    assert sgeom.success_baseline(s, busy) == pytest.approx(ref, rel=1e-8, abs=1e-14)


@given(at=st.floats(0.0, 10.0), th=st.floats(-20.0, 10.0), busy=st.floats(0.0, 1.0))
def test_eta4_form(at, th, busy):
    s = NetworkScenario.reference_defaults(alpha_tilde=at, theta_db=th)
    assert sgeom.success_baseline_eta4(s, busy) == pytest.approx(sgeom.success_baseline(s, busy), rel=1e-12)


def test_limits():
    s = NetworkScenario.reference_defaults()
    noise_only = math.exp(-s.noise * s.sinr_threshold / s.power_threshold)
    assert sgeom.success_baseline(s, 0.0) == noise_only
    assert sgeom.success_baseline(s.with_theta_db(-200.0), 1.0) == pytest.approx(1.0, abs=1e-15)


@given(b1=st.floats(0.0, 1.0), b2=st.floats(0.0, 1.0))
def test_decreasing_in_activity(b1, b2):
    s = NetworkScenario.reference_defaults()
    lo, hi = sorted((b1, b2))
    assert sgeom.success_baseline(s, hi) <= sgeom.success_baseline(s, lo)


def _ramping_oracle(s, probs, m):
    rho = s.ramp_thresholds
    theta, at = s.sinr_threshold, s.alpha_tilde
    val = math.exp(-s.noise * theta / rho[m - 1])
    for rk, pk in zip(rho, probs):
        z = theta * rk / rho[m - 1]
        j, _ = integrate.quad(lambda y: y * z / (y ** 4 + z), 1, np.inf, epsabs=0, epsrel=1e-12, limit=200)
        val *= negbin_lt_sum(pk * at, 1 / (1 + z)) * math.exp(-2 * pk * at * j)
    return val


@pytest.mark.parametrize("m", [1, 3, 6])
def test_ramping_matches_quadrature(m):
    s = NetworkScenario.reference_defaults(alpha_tilde=8.0, theta_db=-6.0)
    probs = [0.2, 0.1, 0.05, 0.05, 0.02, 0.01]
    assert sgeom.success_ramping(s, probs, m) == pytest.approx(_ramping_oracle(s, probs, m), rel=1e-8)


def test_ramping_reductions():
    s = NetworkScenario.reference_defaults()
    one = (s.power_threshold,)
    for busy in (0.0, 0.3, 1.0):
        assert sgeom.success_ramping(s, [busy], 1, one) == sgeom.success_baseline(s, busy)
    zeros = np.zeros(6)
    for m in range(1, 7):
        expected = math.exp(-s.noise * s.sinr_threshold / s.ramp_thresholds[m - 1])
        assert sgeom.success_ramping(s, zeros, m) == pytest.approx(expected, rel=1e-15)


def test_ramping_louder_phase_succeeds_more():
    s = NetworkScenario.reference_defaults(alpha_tilde=4.0)
    p = sgeom.success_ramping_all(s, [0.1, 0.05, 0.02, 0.01, 0.01, 0.01])
    assert np.all(np.diff(p) > 0)


def test_profile_dispatch_and_errors():
    s = NetworkScenario.reference_defaults()
    assert sgeom.success_for_profile(s, SchemeConfig.backoff(2, 0.5), [0.3])[0] == sgeom.success_baseline(s, 0.3)
    with pytest.raises(ValueError):
        sgeom.success_for_profile(s, SchemeConfig.baseline(), [0.1, 0.2])
    with pytest.raises(ValueError):
        sgeom.success_ramping(s, [0.1], 1)
    with pytest.raises(IndexError):
        sgeom.success_ramping(s, np.zeros(6), 7)
    with pytest.raises(ValueError):
        sgeom.success_baseline(s, 1.5)
