import math

import numpy as np
import pytest

from iotstab import coupling, montecarlo as mc, sgeom
from iotstab.scenario import NetworkScenario, SchemeConfig

# small window: measured disk of 1 km plus 1 km interference reach fits inside
SMALL = mc.SimConfig(window=5.0, measure_radius=1.0, warmup_slots=30, measured_slots=60, realizations=4,
                     rng_seed=11, trace_len=90)


def test_config_validation():
    with pytest.raises(ValueError):
        mc.SimConfig(window=2.0, measure_radius=1.0)
    with pytest.raises(ValueError):
        mc.SimConfig(realizations=0)
    with pytest.raises(ValueError):
        mc.SimConfig(interference_radius=0.0)


def test_edge_policy_disk():
    pol = mc.edge_policy(10.0, 1.0)
    xy = np.array([[0.0, 0.0], [0.99, 0.0], [1.01, 0.0], [4.9, 4.9]])
    assert pol.measured(xy).tolist() == [True, True, False, False]
    with pytest.raises(ValueError):
        mc.edge_policy(2.0, 1.5)


def test_layout_counts_and_association():
    s = NetworkScenario.reference_defaults(alpha_tilde=1.0)
    lay = mc.draw_layout(s, SMALL, np.random.default_rng(5))
    inside = np.hypot(lay.dev_xy[:, 0], lay.dev_xy[:, 1]) < 1.0
    assert lay.n_meas == inside.sum() and inside[:lay.n_meas].all()
    d = np.hypot(*(lay.dev_xy[:, None, :] - lay.bs_xy[None, :, :]).transpose(2, 0, 1))
    assert np.array_equal(lay.serve, d.argmin(axis=1))
    np.testing.assert_allclose(lay.r_eta, d.min(axis=1) ** 4, rtol=1e-12)


def test_no_arrivals_idle():
    s = NetworkScenario.reference_defaults(alpha_tilde=1.0, arrival_prob=0.0)
    st = mc.run(s, SchemeConfig.baseline(), SMALL)
    assert math.isnan(st.p) and st.idle_fraction == 1.0 and st.mean_queue == 0.0
    assert all(np.all(fq == 0) for fq in st.final_queues)


def test_noise_only_without_code_collisions():
    # thousands of codes per BS: collisions, hence interference, all but vanish
    s = NetworkScenario.reference_defaults(alpha_tilde=1.0).replace(codes_per_bs=4096)
    st = mc.run_frozen_activity(s, SchemeConfig.baseline(), [1.0], SMALL)
    p_noise = math.exp(-s.noise * s.sinr_threshold / s.power_threshold)
    assert abs(st.p - sgeom.success_baseline(s, 1.0)) < 3 * st.p_se
    assert abs(st.p - p_noise) < 0.01


def test_zero_activity_no_attempts():
    st = mc.run_frozen_activity(NetworkScenario.reference_defaults(), SchemeConfig.baseline(), [0.0], SMALL)
    assert st.attempts == 0 and math.isnan(st.p)


# 2 km measured disk, 16 layouts: standard error of p below 0.01
WIDE = mc.SimConfig(window=7.0, measure_radius=2.0, warmup_slots=0, measured_slots=5, realizations=16, rng_seed=1)


@pytest.fixture(scope="module")
def full_activity():
    s = NetworkScenario.reference_defaults(alpha_tilde=4.0, theta_db=-10.0)
    return sgeom.success_baseline(s, 1.0), mc.run_frozen_activity(s, SchemeConfig.baseline(), [1.0], WIDE)


def test_full_activity_gap_bounded(full_activity):
    # the closed form uses the unbiased cell-load law and overestimates p
    analytic, st = full_activity
    assert st.p_se < 0.01
    assert 0.0 < analytic - st.p < 0.05


@pytest.mark.xfail(strict=True, reason="closed form exceeds the simulated full-activity p by about 0.034")
def test_full_activity_within_three_hundredths(full_activity):
    analytic, st = full_activity
    assert abs(st.p - analytic) < 0.03


def test_frozen_ramping_profile_per_phase():
    s = NetworkScenario.reference_defaults(alpha_tilde=4.0, theta_db=-10.0)
    profile = [0.2, 0.1, 0.05, 0.05, 0.05, 0.05]
    st = mc.run_frozen_activity(s, SchemeConfig.ramping(), profile, WIDE)
    expected = sgeom.success_ramping_all(s, profile)
    assert np.max(np.abs(st.p_phase - expected)) < 0.03


def test_frozen_validation():
    s = NetworkScenario.reference_defaults()
    with pytest.raises(ValueError):
        mc.run_frozen_activity(s, SchemeConfig.baseline(), [0.5, 0.5], SMALL)
    with pytest.raises(ValueError):
        mc.run_frozen_activity(s, SchemeConfig.ramping(), [0.5] * 6, SMALL)


def test_deterministic_given_seed():
    s = NetworkScenario.reference_defaults(alpha_tilde=1.0, theta_db=-6.0)
    a = mc.run(s, SchemeConfig.backoff(1, 0.5), SMALL)
    b = mc.run(s, SchemeConfig.backoff(1, 0.5), SMALL)
    c = mc.run(s, SchemeConfig.backoff(1, 0.5), mc.SimConfig(**{**SMALL.__dict__, "rng_seed": 12}))
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_threads_do_not_change_results():
    s = NetworkScenario.reference_defaults(alpha_tilde=1.0)
    one = mc.run(s, SchemeConfig.baseline(), SMALL)
    two = mc.run(s, SchemeConfig.baseline(), mc.SimConfig(**{**SMALL.__dict__, "threads": 2}))
    assert one.fingerprint() == two.fingerprint()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_scheme_reductions_bitwise(seed):
    s = NetworkScenario.reference_defaults(alpha_tilde=2.0 + seed, theta_db=-12.0 + 3 * seed, arrival_prob=0.1 + 0.05 * seed)
    sim = mc.SimConfig(**{**SMALL.__dict__, "rng_seed": seed, "realizations": 2})
    ref = mc.run(s, SchemeConfig.baseline(), sim)
    for scheme in (SchemeConfig.backoff(0, 1.0), SchemeConfig.ramping((s.power_threshold,))):
        other = mc.run(s, scheme, sim)
        for t1, t2 in zip(ref.traces, other.traces):
            assert np.array_equal(t1[:, :3], t2[:, :3])
        assert ref.p == other.p and ref.mean_queue == other.mean_queue


def test_coupled_success_close_to_analysis():
    s = NetworkScenario.reference_defaults(alpha_tilde=4.0, theta_db=-10.0)
    sim = mc.SimConfig(window=5.0, warmup_slots=100, measured_slots=200, realizations=4, rng_seed=4)
    st = mc.run(s, SchemeConfig.baseline(), sim)
    res = coupling.solve_baseline(s)
    assert abs(st.p - res.p) < 0.03
    assert abs(st.idle_fraction - res.x0) < 0.03
