"""Exhaustive search over backoff parameters ``(N, q)``.

Among pairs giving a stable queue the mean waiting time is minimised. If no
pair is stable the mean number of busy slots per delivered packet is
minimised instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coupling, qbd
from .scenario import NetworkScenario, SchemeConfig

__all__ = ["BackoffSearchSpace", "BackoffCell", "BackoffOptimum", "optimize", "surface_rows"]

_REL_TIE = 1e-9


@dataclass(frozen=True)
class BackoffSearchSpace:
    n_values: tuple[int, ...] = tuple(range(9))
    q_values: tuple[float, ...] = tuple(round(0.01 * k, 2) for k in range(1, 101))

    def __post_init__(self):
        if not self.n_values or not self.q_values:
            raise ValueError("search space must be non-empty")
        if any(n < 0 or int(n) != n for n in self.n_values):
            raise ValueError("N values must be non-negative integers")
        if any(not 0 < q <= 1 for q in self.q_values):
            raise ValueError("q values must lie in (0, 1]")


@dataclass(frozen=True)
class BackoffCell:
    n: int
    q: float
    stable: bool
    mean_wait: float
    delay: float
    mean_backoff: float
    p: float
    error: str | None = None


@dataclass
class BackoffOptimum:
    n: int
    q: float
    objective: float
    objective_kind: str  # "waiting_time" or "retransmissions"
    stable: bool
    mean_backoff: float
    delay: float
    cells: list = field(default_factory=list, repr=False)


def _evaluate(s, n, q, cfg):
    try:
        res = coupling.solve(s, SchemeConfig.backoff(n, q), cfg)
    except (coupling.CouplingError, qbd.QbdError, ArithmeticError) as exc:
        return BackoffCell(n, q, False, math.nan, math.nan, math.nan, math.nan, str(exc))
    wait = res.mean_wait if res.stable else math.nan
    return BackoffCell(n, q, res.stable, wait, res.delay, res.mean_backoff, res.p)


def optimize(s: NetworkScenario, space: BackoffSearchSpace = BackoffSearchSpace(),
             cfg: coupling.FixedPointConfig | None = None) -> BackoffOptimum:
    """Grid search; ties go to the smaller ``N`` and then the larger ``q``."""
    cfg = cfg or coupling.FixedPointConfig()
    cells = [_evaluate(s, int(n), float(q), cfg) for n in space.n_values for q in space.q_values]
    ok = [c for c in cells if c.error is None]
    if not ok:
        raise coupling.CouplingError("every backoff configuration failed to solve")
    stable = [c for c in ok if c.stable]
    if stable:
        kind, pool, key = "waiting_time", stable, (lambda c: c.mean_wait)
    else:
        kind, pool, key = "retransmissions", ok, (lambda c: c.delay)
    best = min(key(c) for c in pool)
    ties = [c for c in pool if key(c) <= best + _REL_TIE * abs(best) + 1e-15]
    win = min(ties, key=lambda c: (c.n, -c.q))
    return BackoffOptimum(win.n, win.q, key(win), kind, win.stable, win.mean_backoff, win.delay, cells)


def surface_rows(opt: BackoffOptimum):
    """``(N, q, stable, E_Wq, D, mean_backoff)`` per grid cell."""
    for c in opt.cells:
        yield (c.n, c.q, int(c.stable), c.mean_wait, c.delay, c.mean_backoff)
