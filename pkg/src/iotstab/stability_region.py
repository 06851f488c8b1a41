"""Closed-form stability tests and stability-frontier sweeps.

The success probability falls as activity grows, so evaluating it at the
heaviest admissible activity gives a sufficient condition for stability and
at the lightest admissible activity a necessary one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import coupling, qbd, sgeom
from .scenario import NetworkScenario, SchemeConfig, to_linear
from .specfun import VORONOI_C

__all__ = [
    "StabilityVerdict",
    "FrontierPoint",
    "FrontierResult",
    "baseline_conditions",
    "alpha_bounds",
    "alpha_exact_bounds",
    "scheme_conditions",
    "frontier_sweep",
    "default_theta_grid",
    "default_arrival_grid",
]


@dataclass(frozen=True)
class StabilityVerdict:
    sufficient_holds: bool
    necessary_holds: bool
    iterative_verdict: bool | None = None

    @property
    def stable(self) -> bool:
        """Best available verdict."""
        if self.sufficient_holds:
            return True
        if not self.necessary_holds:
            return False
        return bool(self.iterative_verdict)


def baseline_conditions(s: NetworkScenario, cfg: coupling.FixedPointConfig | None = None,
                        iterate: bool = True) -> StabilityVerdict:
    """Sufficient test ``p(busy=1) > a`` and necessary test ``p(busy=a) > a``.

    When only the necessary test passes the coupled solve decides.
    """
    a = s.arrival_prob
    if a == 0.0:
        return StabilityVerdict(True, True, None)
    suff = sgeom.success_baseline(s, 1.0) / a > 1.0
    nec = sgeom.success_baseline(s, a) / a > 1.0
    verdict = None
    if nec and not suff and iterate:
        verdict = coupling.solve(s, SchemeConfig.baseline(), cfg or coupling.FixedPointConfig(),
                                  metrics=False).stable
    return StabilityVerdict(suff, nec, verdict)


def alpha_bounds(a: float, theta: float, c: float = VORONOI_C) -> tuple[float, float]:
    """Largest traffic intensity passing the interference-only tests.

    Only the intra-cell factor is kept, so these are upper bounds on the
    exact thresholds. Returns ``(sufficient_bound, necessary_bound)``.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    if not theta > 0:
        raise ValueError("theta must be positive")
    suff = (a ** (-1.0 / c) - 1.0) * (theta + 1.0) * c / theta
    return suff, suff / a


def alpha_exact_bounds(s: NetworkScenario) -> tuple[float, float]:
    """Traffic intensities at which the full sufficient/necessary tests switch.

    Roots in ``alpha_tilde`` of ``p(busy) = a`` at ``busy = 1`` and
    ``busy = a``; zero when even the noise-only link fails the test.
    """
    a = s.arrival_prob
    if not 0.0 < a < 1.0:
        raise ValueError("arrival_prob must lie in (0, 1)")

    def root(busy):
        f = lambda at: sgeom.success_baseline(s.with_alpha_tilde(at), busy) - a
        if f(0.0) <= 0:
            return 0.0
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
        return brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-13)

    return root(1.0), root(a)


def _drift_ok(s: NetworkScenario, scheme: SchemeConfig, profile) -> bool:
    p = sgeom.success_for_profile(s, scheme, profile)
    return qbd.is_stable(qbd.build_ph(scheme, p), s.arrival_prob)[0]


def scheme_conditions(s: NetworkScenario, scheme: SchemeConfig,
                      cfg: coupling.FixedPointConfig | None = None,
                      iterate: bool = True) -> StabilityVerdict:
    """Drift test at the lightest and heaviest activity profiles.

    Lightest: only phase 1 active with probability ``a``. Heaviest: ramping
    devices always in the last (loudest) phase, backoff devices always in
    the transmit phase.
    """
    if scheme.kind == "baseline":
        return baseline_conditions(s, cfg, iterate)
    a = s.arrival_prob
    if a == 0.0:
        return StabilityVerdict(True, True, None)
    if scheme.kind == "ramping":
        m = len(scheme.ramp_powers(s))
        light = np.zeros(m)
        light[0] = a
        heavy = np.zeros(m)
        heavy[-1] = 1.0
    else:
        light, heavy = np.array([a]), np.array([1.0])
    suff = _drift_ok(s, scheme, heavy)
    nec = _drift_ok(s, scheme, light)
    verdict = None
    if nec and not suff and iterate:
        verdict = coupling.solve(s, scheme, cfg or coupling.FixedPointConfig(), metrics=False).stable
    return StabilityVerdict(suff, nec, verdict)


def default_theta_grid() -> np.ndarray:
    return np.arange(-20.0, 0.0 + 0.5, 1.0)


def default_arrival_grid() -> np.ndarray:
    return np.round(np.arange(0.0, 0.5 + 1e-9, 0.0125), 10)


_AXES = ("theta_db", "arrival", "alpha")


def _apply(s: NetworkScenario, name: str, value: float) -> NetworkScenario:
    if name == "theta_db":
        return s.replace(sinr_threshold=to_linear(value))
    if name == "arrival":
        return s.replace(arrival_prob=value)
    if name == "alpha":
        return s.with_alpha_tilde(value)
    raise ValueError(f"unknown axis {name!r}; expected one of {_AXES}")


@dataclass(frozen=True)
class FrontierPoint:
    coords: dict
    stable: bool
    p: float = math.nan
    x0: float = math.nan
    error: str | None = None


@dataclass
class FrontierResult:
    scheme: SchemeConfig
    axes: tuple[str, str]
    fixed: tuple[str, float]
    points: list = field(default_factory=list)
    frontier: list = field(default_factory=list)

    def rows(self):
        """CSV rows in grid order."""
        fixed = f"{self.fixed[0]}={self.fixed[1]:g}"
        for pt in self.points:
            yield (self.scheme.label(), fixed, pt.coords[self.axes[0]], pt.coords[self.axes[1]],
                   int(pt.stable), pt.p, pt.x0)


def _solve_point(s, scheme, cfg):
    try:
        res = coupling.solve(s, scheme, cfg, metrics=False)
    except (coupling.CouplingError, qbd.QbdError, ArithmeticError) as exc:
        return False, math.nan, math.nan, str(exc)
    return res.stable, res.p, res.x0, None


def frontier_sweep(base: NetworkScenario, scheme: SchemeConfig, axis1: tuple[str, np.ndarray],
                   axis2: tuple[str, np.ndarray], fixed: tuple[str, float],
                   cfg: coupling.FixedPointConfig | None = None,
                   bisect_steps: int = 8) -> FrontierResult:
    """Stability over a two-axis grid plus the boundary along ``axis2``.

    Args:
        base: scenario supplying every parameter not swept.
        scheme: access scheme.
        axis1, axis2: ``(name, increasing values)`` with names drawn from
            ``theta_db``, ``arrival`` and ``alpha``. The stable set is
            assumed to shrink as ``axis2`` grows.
        fixed: ``(name, value)`` for the third parameter.
        bisect_steps: refinement steps between the last stable and first
            unstable grid value on each ``axis1`` line.

    Returns:
        Grid points in row-major order and the frontier polyline as
        ``(axis1 value, axis2 boundary)`` pairs (``nan`` when the whole line
        is stable or unstable).
    """
    cfg = cfg or coupling.FixedPointConfig()
    (n1, v1), (n2, v2) = axis1, axis2
    if len({n1, n2, fixed[0]}) != 3:
        raise ValueError("axes and fixed parameter must be distinct")
    v1, v2 = np.asarray(v1, float), np.asarray(v2, float)
    if (np.diff(v1) <= 0).any() or (np.diff(v2) <= 0).any():
        raise ValueError("sweep grids must be strictly increasing")
    s_fixed = _apply(base, *fixed)
    result = FrontierResult(scheme, (n1, n2), fixed)
    for x in v1:
        s_line = _apply(s_fixed, n1, float(x))
        line = []
        for y in v2:
            st, p, x0, err = _solve_point(_apply(s_line, n2, float(y)), scheme, cfg)
            pt = FrontierPoint({n1: float(x), n2: float(y)}, st, p, x0, err)
            result.points.append(pt)
            line.append(st)
        result.frontier.append((float(x), _boundary(s_line, scheme, cfg, n2, v2, line, bisect_steps)))
    return result


def _boundary(s_line, scheme, cfg, name, values, line, steps):
    idx = [i for i in range(len(line) - 1) if line[i] and not line[i + 1]]
    if not idx:
        return math.nan
    lo, hi = float(values[idx[0]]), float(values[idx[0] + 1])
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if _solve_point(_apply(s_line, name, mid), scheme, cfg)[0]:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
