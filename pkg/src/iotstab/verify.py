"""Cross-checks of the analytical machinery against independent computations.

Every check returns a :class:`CheckResult`; :func:`run_all` collects them
for the ``verify`` subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import coupling, qbd, sgeom, tempcorr
from .scenario import NetworkScenario, SchemeConfig

__all__ = ["CheckResult", "truncated_chain", "random_ph", "desk_points", "run_all", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)


def truncated_chain(ph: qbd.PhService, a: float, levels: int = 200):
    """Direct stationary solve of the level-truncated chain.

    Arrivals that would exceed ``levels`` are dropped. Returns ``(x0, X)``
    with ``X[i]`` the row vector of level ``i + 1``.
    """
    n, S, beta = ph.n, ph.S, ph.beta
    s = ph.s
    ab = 1.0 - a
    dim = 1 + levels * n
    P = np.zeros((dim, dim))
    sb = np.outer(s, beta)
    P[0, 0] = ab
    P[0, 1:1 + n] = a * beta
    for lv in range(levels):
        cur = slice(1 + lv * n, 1 + (lv + 1) * n)
        if lv == 0:
            P[cur, 0] = ab * s
        else:
            P[cur, 1 + (lv - 1) * n:1 + lv * n] += ab * sb
        P[cur, cur] += a * sb + ab * S
        if lv + 1 < levels:
            P[cur, 1 + (lv + 1) * n:1 + (lv + 2) * n] += a * S
        else:
            P[cur, cur] += a * S
    A = (P - np.eye(dim)).T
    A[-1, :] = 1.0
    rhs = np.zeros(dim)
    rhs[-1] = 1.0
    x = linalg.solve(A, rhs)
    return float(x[0]), x[1:].reshape(levels, n)


def random_ph(rng: np.random.Generator, n: int) -> qbd.PhService:
    """Random PH law with an exit probability of at least 0.05 from every phase."""
    S = rng.random((n, n))
    S *= rng.uniform(0.05, 0.95, size=(n, 1)) / S.sum(axis=1, keepdims=True)
    beta = rng.random(n)
    beta /= beta.sum()
    return qbd.PhService(beta, S, np.zeros(n))


def _closed_forms() -> CheckResult:
    err, cases = 0.0, 0
    for p in np.linspace(0.05, 0.99, 20):
        for a in np.linspace(0.01, 0.95, 20):
            if a >= p:
                continue
            sol = qbd.solve_qbd(qbd.build_ph(SchemeConfig.baseline(), [p]), a)
            x0 = (p - a) / p
            eq = a * (1 - a) * p * x0 / (p - a) ** 2
            ew = a * (1 - a) * x0 / (p - a) ** 2
            scale = max(1.0, eq)
            err = max(err, abs(sol.x0 - x0), abs(qbd.mean_queue_length(sol) - eq) / scale,
                      abs(qbd.mean_waiting_time(sol) - ew) / max(1.0, ew))
            cases += 1
    return CheckResult("geo_geo_1_closed_forms", err, 1e-12, cases)


def desk_points():
    """Small scenarios whose queues are short enough for a 200-level cut."""
    base = NetworkScenario.reference_defaults()
    pts = []
    for at, th, a in ((1.0, -10.0, 0.1), (2.0, -10.0, 0.1), (4.0, -15.0, 0.1), (1.0, -5.0, 0.2), (4.0, -10.0, 0.05)):
        pts.append(base.with_alpha_tilde(at).with_theta_db(th).replace(arrival_prob=a))
    return pts


def _schemes():
    return (SchemeConfig.baseline(), SchemeConfig.ramping(), SchemeConfig.backoff(2, 0.5))


def _truncated_oracle() -> CheckResult:
    err, cases = 0.0, 0
    for scheme in _schemes():
        for s in desk_points():
            res = coupling.solve(s, scheme)
            if not res.stable:
                continue
            ph = qbd.build_ph(scheme, res.success[res._transmit_mask()] if scheme.kind != "backoff"
                              else res.success[:1])
            x0, X = truncated_chain(ph, s.arrival_prob)
            Pi = X.sum(axis=0)
            eq = float((np.arange(1, X.shape[0] + 1) * X.sum(axis=1)).sum())
            err = max(err, abs(x0 - res.x0), float(np.max(np.abs(Pi - res.Pi))), abs(eq - res.mean_queue))
            cases += 1
    return CheckResult("truncated_chain_oracle", err, 1e-6, cases)


def _r_matrix(seed: int = 12345, count: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    err, cases = 0.0, 0
    while cases < count:
        ph = random_ph(rng, int(rng.integers(1, 9)))
        a = float(rng.uniform(0.01, 0.9))
        if not qbd.is_stable(ph, a)[0]:
            continue
        blocks = qbd.qbd_blocks(ph, a)
        err = max(err, float(np.max(np.abs(qbd.solve_r_matrix(blocks) - qbd.iterate_r_matrix(blocks)))))
        cases += 1
    return CheckResult("r_matrix_explicit_vs_iterative", err, 1e-10, cases)


def _arctan() -> CheckResult:
    from .specfun import gauss_2f1_interference

    err = 0.0
    grid = (0.01, 0.1, 1.0, 10.0, 100.0)
    for th in grid:
        lhs = 2 * th / (4 - 2) * gauss_2f1_interference(4.0, th, 1)
        err = max(err, abs(lhs - math.sqrt(th) * math.atan(math.sqrt(th))))
    return CheckResult("hypergeometric_arctan_identity", err, 1e-10, len(grid))


def _temporal() -> CheckResult:
    cs = tempcorr.CorrelationScenario(NetworkScenario.reference_defaults(alpha_tilde=4.0), 0.5)
    err, cases = 0.0, 0
    for th in np.arange(-20.0, 0.5, 1.0):
        c = cs.at_theta_db(float(th))
        err = max(err, abs(tempcorr.joint_failure(c) - tempcorr.joint_failure_quadrature(c)))
        cases += 1
    return CheckResult("temporal_closed_form_vs_quadrature", err, 1e-4, cases)


def _reductions() -> CheckResult:
    rng = np.random.default_rng(2024)
    err = 0.0
    count = 10
    for _ in range(count):
        s = NetworkScenario.reference_defaults(alpha_tilde=float(rng.uniform(0.5, 8.0)),
                                           theta_db=float(rng.uniform(-20.0, 0.0)),
                                           arrival_prob=float(rng.uniform(0.01, 0.4)))
        ref = coupling.solve(s, SchemeConfig.baseline())
        for scheme in (SchemeConfig.backoff(0, 1.0), SchemeConfig.ramping((s.power_threshold,))):
            other = coupling.solve(s, scheme)
            if other.stable != ref.stable:
                err = math.inf
                continue
            pairs = [(ref.x0, other.x0), (ref.p, other.p), (ref.delay, other.delay)]
            if ref.stable:
                pairs += [(ref.mean_queue, other.mean_queue), (ref.mean_wait, other.mean_wait)]
            err = max(err, max(abs(u - v) for u, v in pairs))
    return CheckResult("scheme_reductions", err, 1e-12, count)


def _sandwich() -> CheckResult:
    from .stability_region import baseline_conditions, default_arrival_grid, default_theta_grid

    bad, cases = 0, 0
    base = NetworkScenario.reference_defaults(alpha_tilde=4.0)
    for th in default_theta_grid()[::4]:
        for a in default_arrival_grid()[1::4]:
            s = base.with_theta_db(float(th)).replace(arrival_prob=float(a))
            v = baseline_conditions(s, iterate=False)
            res = coupling.solve(s, SchemeConfig.baseline(), metrics=False)
            bad += int((v.sufficient_holds and not res.stable) or (not v.necessary_holds and res.stable))
            cases += 1
    return CheckResult("stability_sandwich", float(bad), 0.0, cases)


def _eta4() -> CheckResult:
    err = 0.0
    base = NetworkScenario.reference_defaults()
    for th in (-20.0, -10.0, 0.0):
        for busy in (0.1, 0.5, 1.0):
            s = base.with_theta_db(th)
            err = max(err, abs(sgeom.success_baseline(s, busy) - sgeom.success_baseline_eta4(s, busy)))
    return CheckResult("success_probability_eta4_form", err, 1e-12, 9)


CHECKS = {
    "closed_forms": _closed_forms,
    "truncated_chain": _truncated_oracle,
    "r_matrix": _r_matrix,
    "arctan": _arctan,
    "eta4": _eta4,
    "temporal": _temporal,
    "reductions": _reductions,
    "sandwich": _sandwich,
}


def run_all(names=None) -> list[CheckResult]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    return [CHECKS[n]() for n in names]
