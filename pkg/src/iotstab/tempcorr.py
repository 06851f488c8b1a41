"""Failure correlation between two slots sharing part of the interferers.

Each device interferes in a given slot with probability ``K`` independently
across slots, so interferers split into those active in slot 1 only, slot 2
only, and both. Fades are redrawn every slot; common interferers still
correlate the two outcomes through their positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sgeom
from .scenario import NetworkScenario, alpha_tilde, to_linear
from .specfun import VORONOI_C, Quadrature, gauss_2f1_interference, integrate, neighbor_pmf_array

__all__ = [
    "CorrelationScenario",
    "pair_integrals",
    "marginal_failure",
    "joint_success",
    "joint_failure",
    "joint_failure_quadrature",
    "conditional_failure",
    "correlation_report",
]


@dataclass(frozen=True)
class CorrelationScenario:
    base: NetworkScenario
    activity: float

    def __post_init__(self):
        if not 0.0 <= self.activity <= 1.0:
            raise ValueError("activity must lie in [0, 1]")

    def at_theta_db(self, theta_db: float) -> "CorrelationScenario":
        return CorrelationScenario(self.base.replace(sinr_threshold=to_linear(theta_db)), self.activity)


def _phi(tau: float, mean: float, c: float = VORONOI_C) -> float:
    """Negative-binomial PGF at ``1 - tau`` for a count with the given mean."""
    return (1.0 + tau * mean / c) ** (-c)


def pair_integrals(theta: float, eta: float) -> tuple[float, float]:
    """Closed forms of the normalised inter-cell integrals.

    ``J0 = int_1^inf y (1 - 1/(1 + theta y^-eta)) dy`` (one slot) and
    ``J1 = int_1^inf y (1 - 1/(1 + theta y^-eta)^2) dy`` (both slots).
    """
    psi1 = gauss_2f1_interference(eta, theta, 1)
    psi2 = gauss_2f1_interference(eta, theta, 2)
    j0 = theta / (eta - 2.0) * psi1
    j1 = (
        theta * (2.0 + theta) / (eta * (1.0 + theta))
        + 4.0 * theta * psi1 / (eta * (eta - 2.0))
        - theta ** 2 * (eta - 2.0) * psi2 / (2.0 * eta * (eta - 1.0))
    )
    return j0, j1


def marginal_failure(cs: CorrelationScenario) -> float:
    return 1.0 - sgeom.success_baseline(cs.base, cs.activity)


def joint_success(cs: CorrelationScenario, literal: bool = False) -> float:
    """Probability that both slots succeed.

    With ``literal=True`` the both-slot terms are evaluated with the
    single-slot intra-cell factor and a positive ``psi(2)`` coefficient; the
    result is kept only to quantify how far that variant is off.
    """
    s, k = cs.base, cs.activity
    theta, eta = s.sinr_threshold, s.pathloss_exponent
    at = alpha_tilde(s)
    one, both = k * (1.0 - k) * at, k * k * at
    tau1 = theta / (1.0 + theta)
    tau2 = theta * (2.0 + theta) / (1.0 + theta) ** 2
    j0, j1 = pair_integrals(theta, eta)
    if literal:
        psi2 = gauss_2f1_interference(eta, theta, 2)
        j1 += theta ** 2 * (eta - 2.0) * psi2 / (eta * (eta - 1.0))
        tau2 = tau1
    noise = math.exp(-2.0 * s.noise * theta / s.power_threshold)
    intra = _phi(tau1, one) ** 2 * _phi(tau2, both)
    inter = math.exp(-2.0 * (both * j1 + 2.0 * one * j0))
    return noise * intra * inter


def joint_failure(cs: CorrelationScenario, literal: bool = False) -> float:
    """Probability that both slots fail (inclusion-exclusion)."""
    p = sgeom.success_baseline(cs.base, cs.activity)
    return 1.0 - 2.0 * p + joint_success(cs, literal)


def _negbin_pgf_sum(mean: float, z: float, tail: float = 1e-15) -> float:
    if mean == 0.0:
        return 1.0
    n_max = 64
    while True:
        pmf = neighbor_pmf_array(n_max, mean, 1.0)
        if 1.0 - pmf.sum() < tail or n_max > 1 << 16:
            return float(pmf @ z ** np.arange(n_max + 1))
        n_max *= 2


def joint_failure_quadrature(cs: CorrelationScenario, quad: Quadrature = Quadrature()) -> float:
    """Same quantity from direct integrals and explicit neighbour-count sums."""
    s, k = cs.base, cs.activity
    theta, eta = s.sinr_threshold, s.pathloss_exponent
    at = alpha_tilde(s)
    z = 1.0 / (1.0 + theta)
    j0 = integrate(lambda y: y * theta / (y ** eta + theta), 1.0, math.inf, quad)
    j1 = integrate(lambda y: y * theta * (2.0 * y ** eta + theta) / (y ** eta + theta) ** 2,
                   1.0, math.inf, quad)
    noise = math.exp(-s.noise * theta / s.power_threshold)
    p = noise * _negbin_pgf_sum(k * at, z) * math.exp(-2.0 * k * at * j0)
    one, both = k * (1.0 - k) * at, k * k * at
    intra = _negbin_pgf_sum(one, z) ** 2 * _negbin_pgf_sum(both, z * z)
    iii = noise ** 2 * intra * math.exp(-2.0 * (both * j1 + 2.0 * one * j0))
    return 1.0 - 2.0 * p + iii


def conditional_failure(cs: CorrelationScenario) -> float:
    """P{slot 2 fails | slot 1 fails}."""
    f = marginal_failure(cs)
    if f < 1e-15:
        raise ZeroDivisionError("marginal failure probability is numerically zero")
    return joint_failure(cs) / f


def correlation_report(cs: CorrelationScenario, theta_db_grid) -> list[tuple]:
    """Rows ``(theta_db, marginal, conditional, gap, joint)``."""
    rows = []
    for t in theta_db_grid:
        c = cs.at_theta_db(float(t))
        f = marginal_failure(c)
        cond = conditional_failure(c)
        rows.append((float(t), f, cond, cond - f, joint_failure(c)))
    return rows
