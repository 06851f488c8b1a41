"""Joint solution of interference and queueing.

Success probabilities depend on how often other devices transmit, which in
turn depends on their queues. The two are solved by iterating

    activity -> success probabilities -> Geo/PH/1 solve -> activity

until the busy-phase vector stops moving. Once an iterate is found unstable
the device is treated as saturated for the rest of the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qbd, sgeom
from .scenario import NetworkScenario, SchemeConfig

__all__ = [
    "CouplingError",
    "FixedPointConfig",
    "FixedPointResult",
    "SchemeAnalysis",
    "fixed_point",
    "solve",
    "solve_baseline",
    "solve_ramping",
    "solve_backoff",
]


class CouplingError(RuntimeError):
    """The fixed-point iteration failed to converge."""

    def __init__(self, msg, trace=()):
        super().__init__(msg)
        self.trace = list(trace)


@dataclass(frozen=True)
class FixedPointConfig:
    """Stopping rule and damping for :func:`fixed_point`."""

    tolerance: float = 1e-8
    max_iterations: int = 1000
    damping: float = 1.0
    initial_idle: float = 0.75
    window: int = 25

    def __post_init__(self):
        if not 0 < self.tolerance <= 1e-3:
            raise ValueError("tolerance must lie in (0, 1e-3]")
        if self.max_iterations < 10:
            raise ValueError("max_iterations must be at least 10")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 <= self.initial_idle <= 1:
            raise ValueError("initial_idle must lie in [0, 1]")


@dataclass
class FixedPointResult:
    value: np.ndarray
    iterations: int
    converged: bool
    oscillating: bool
    damping: float
    trace: list = field(default_factory=list)


def _stalled(deltas, window):
    if len(deltas) < 2 * window:
        return False
    recent = max(deltas[-window:])
    before = max(deltas[-2 * window:-window])
    return recent >= 0.9 * before


def fixed_point(update, initial, cfg: FixedPointConfig = FixedPointConfig()) -> FixedPointResult:
    """Iterate ``x <- (1 - d) x + d update(x)`` until ``max|dx| < tolerance``.

    When the step sizes stop shrinking over ``cfg.window`` iterations the
    damping is halved once (from 1 to 0.5 by default). A second stall ends
    the run with ``oscillating=True``; hitting ``max_iterations`` ends it
    with ``converged=False``. The trace holds ``(x, max|dx|)`` per step.
    """
    x = np.array(initial, dtype=float)
    d = cfg.damping
    trace, deltas = [], []
    fallback_used = d < 1.0
    for it in range(1, cfg.max_iterations + 1):
        x_new = (1.0 - d) * x + d * np.asarray(update(x), dtype=float)
        delta = float(np.max(np.abs(x_new - x))) if x.size else 0.0
        x = x_new
        trace.append((x.copy(), delta))
        deltas.append(delta)
        if delta < cfg.tolerance:
            return FixedPointResult(x, it, True, False, d, trace)
        if _stalled(deltas, cfg.window):
            if fallback_used:
                return FixedPointResult(x, it, False, True, d, trace)
            d *= 0.5
            fallback_used = True
            deltas.clear()
    return FixedPointResult(x, cfg.max_iterations, False, False, d, trace)


@dataclass(frozen=True)
class SchemeAnalysis:
    """Converged operating point of one scheme.

    ``Pi`` is the marginal probability of each service phase; ``success``
    the per-phase success probability (zero in silent backoff phases).
    Queue metrics are ``None`` when unstable.
    """

    scheme: SchemeConfig
    stable: bool
    x0: float
    Pi: np.ndarray
    success: np.ndarray
    mean_queue: float | None
    mean_wait: float | None
    delay: float
    p_success: float
    mean_backoff: float
    iterations: int
    converged: bool
    trace: list = field(repr=False, default_factory=list)

    @property
    def p(self) -> float:
        """Success probability of a first attempt."""
        return float(self.success[0])

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme.label(),
            "stable": bool(self.stable),
            "x0": float(self.x0),
            "Pi": [float(v) for v in self.Pi],
            "p": [float(v) for v in self.success[self._transmit_mask()]],
            "E_QL": None if self.mean_queue is None else float(self.mean_queue),
            "E_Wq": None if self.mean_wait is None else float(self.mean_wait),
            "D": float(self.delay),
            "P_success": float(self.p_success),
            "mean_backoff": float(self.mean_backoff),
            "iterations": int(self.iterations),
        }

    def _transmit_mask(self):
        if self.scheme.kind == "backoff":
            mask = np.zeros(self.success.size, dtype=bool)
            mask[0] = True
            return mask
        return np.ones(self.success.size, dtype=bool)


def _phase_count(s: NetworkScenario, scheme: SchemeConfig) -> int:
    if scheme.kind == "ramping":
        return len(scheme.ramp_powers(s))
    if scheme.kind == "backoff":
        return scheme.backoff_slots + 2
    return 1


def _activity(scheme: SchemeConfig, Pi: np.ndarray) -> np.ndarray:
    return Pi if scheme.kind == "ramping" else Pi[:1]


def solve(s: NetworkScenario, scheme: SchemeConfig, cfg: FixedPointConfig = FixedPointConfig(),
          metrics: bool = True) -> SchemeAnalysis:
    """Fixed point of the interference/queue coupling for any scheme.

    With ``metrics=False`` the queue length and waiting time are skipped
    (left as ``None``), which keeps large sweeps cheap near the boundary.
    """
    n = _phase_count(s, scheme)
    a = s.arrival_prob
    latched = {"unstable": False}

    def service(Pi):
        p = sgeom.success_for_profile(s, scheme, _activity(scheme, np.clip(Pi, 0.0, 1.0)))
        return p, qbd.build_ph(scheme, p)

    def update(Pi):
        _, ph = service(Pi)
        if not latched["unstable"]:
            sol = qbd.solve_qbd(ph, a)
            if sol.stable:
                return sol.Pi
            latched["unstable"] = True
        return qbd.unstable_phases(ph)

    init = np.zeros(n)
    init[0] = 1.0 - cfg.initial_idle
    res = fixed_point(update, init, cfg)
    trace = res.trace
    if res.oscillating:
        # knife edge between the branches: settle on the saturated one
        latched["unstable"] = True
        res = fixed_point(update, res.value, cfg)
        trace = trace + res.trace
    if not res.converged:
        raise CouplingError(f"no convergence within {cfg.max_iterations} iterations", trace)
    iterations = len(trace)

    p, ph = service(res.value)
    sol = None if latched["unstable"] else qbd.solve_qbd(ph, a)
    if sol is None or not sol.stable:
        Pi = qbd.unstable_phases(ph)
        D, ps = qbd.mean_service_delay(Pi, 0.0, ph.success, ph.transmit)
        return SchemeAnalysis(scheme, False, 0.0, Pi, ph.success, None, None, D, ps,
                              qbd.mean_backoff_per_failure(ph), iterations, True, trace)
    D, ps = qbd.mean_service_delay(sol.Pi, sol.x0, ph.success, ph.transmit)
    return SchemeAnalysis(
        scheme, True, sol.x0, sol.Pi, ph.success,
        qbd.mean_queue_length(sol) if metrics else None,
        qbd.mean_waiting_time(sol) if metrics else None, D, ps,
        qbd.mean_backoff_per_failure(ph), iterations, True, trace,
    )


def solve_baseline(s: NetworkScenario, cfg: FixedPointConfig = FixedPointConfig()) -> SchemeAnalysis:
    return solve(s, SchemeConfig.baseline(), cfg)


def solve_ramping(s: NetworkScenario, cfg: FixedPointConfig = FixedPointConfig(), thresholds=()) -> SchemeAnalysis:
    return solve(s, SchemeConfig.ramping(thresholds), cfg)


def solve_backoff(s: NetworkScenario, cfg: FixedPointConfig = FixedPointConfig(), n: int = 0, q: float = 1.0) -> SchemeAnalysis:
    return solve(s, SchemeConfig.backoff(n, q), cfg)
