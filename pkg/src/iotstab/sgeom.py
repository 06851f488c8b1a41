"""Transmission success probabilities under full channel inversion.

A transmitting device is received at its serving BS with mean power equal to
its power-control target. Interference on the same code comes from devices
in the same cell (negative-binomial count, received at their own target) and
from devices in other cells (a PPP whose received power at the tagged BS is
bounded by their target). Rayleigh fading makes every term a Laplace
transform; the activity profile thins the interferer population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import NetworkScenario, SchemeConfig, alpha_tilde
from .specfun import VORONOI_C, gauss_2f1_interference

__all__ = [
    "ActivityProfile",
    "intra_cell_lt",
    "inter_cell_lt",
    "success_baseline",
    "success_baseline_eta4",
    "success_backoff",
    "success_ramping",
    "success_ramping_all",
    "success_for_profile",
]


@dataclass(frozen=True)
class ActivityProfile:
    """Per-slot interferer activity implied by the queue state.

    ``phase_probs`` has one entry for baseline (busy probability) and backoff
    (probability of sitting in the transmit phase), and ``M`` entries for
    power ramping.
    """

    kind: str
    phase_probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(x) for x in np.atleast_1d(self.phase_probs))
        if any(not 0.0 <= x <= 1.0 for x in probs):
            raise ValueError("activity probabilities must lie in [0, 1]")
        if sum(probs) > 1.0 + 1e-9:
            raise ValueError("activity probabilities must sum to at most one")
        if self.kind != "ramping" and len(probs) != 1:
            raise ValueError(f"{self.kind} activity takes a single probability")
        object.__setattr__(self, "phase_probs", probs)

    @property
    def total(self) -> float:
        return float(sum(self.phase_probs))


def intra_cell_lt(load: float, tau: float, c: float = VORONOI_C) -> float:
    """``E[(1 - tau)^K]`` for a negative-binomial ``K`` with mean ``load``.

    With Rayleigh fading each equal-power intra-cell interferer scales the
    success probability by ``1/(1 + theta) = 1 - tau``.
    """
    return (1.0 + tau * load / c) ** (-c)


def inter_cell_lt(load: float, z: float, eta: float) -> float:
    """Success factor from inter-cell interferers of intensity ``load``.

    ``z`` is the SINR threshold scaled by the interferer-to-target power
    ratio; ``load`` counts interferers per BS area.
    """
    if load == 0.0:
        return 1.0
    return math.exp(-2.0 * load * z / (eta - 2.0) * gauss_2f1_interference(eta, z, 1))


def success_baseline(s: NetworkScenario, busy_prob: float) -> float:
    """Success probability when each device interferes with prob. ``busy_prob``."""
    if not 0.0 <= busy_prob <= 1.0:
        raise ValueError("busy_prob must lie in [0, 1]")
    theta = s.sinr_threshold
    load = busy_prob * alpha_tilde(s)
    noise = math.exp(-s.noise * theta / s.power_threshold)
    return noise * (inter_cell_lt(load, theta, s.pathloss_exponent)
                    * intra_cell_lt(load, theta / (1.0 + theta)))


def success_baseline_eta4(s: NetworkScenario, busy_prob: float) -> float:
    """Same as :func:`success_baseline` using the arctan form valid at eta = 4."""
    if s.pathloss_exponent != 4:
        raise ValueError("arctan form needs pathloss_exponent = 4")
    theta = s.sinr_threshold
    load = busy_prob * alpha_tilde(s)
    rt = math.sqrt(theta)
    num = math.exp(-s.noise * theta / s.power_threshold - load * rt * math.atan(rt))
    return num / (1.0 + theta * load / ((1.0 + theta) * VORONOI_C)) ** VORONOI_C


def success_backoff(s: NetworkScenario, transmit_prob: float) -> float:
    """Success probability when devices sit in the transmit phase w.p. ``transmit_prob``."""
    return success_baseline(s, transmit_prob)


def _ramp_powers(s: NetworkScenario, thresholds) -> tuple[float, ...]:
    ths = tuple(thresholds) if thresholds is not None else s.ramp_thresholds
    if not ths:
        raise ValueError("no ramp thresholds configured")
    return ths


def success_ramping(s: NetworkScenario, phase_probs, m: int, thresholds=None) -> float:
    """Success probability ``p_m`` of an attempt made in ramping phase ``m``.

    Args:
        s: scenario.
        phase_probs: ``Pi_1..Pi_M``, probability a device transmits in phase k.
        m: phase index, 1-based.
        thresholds: power targets ``rho_1 < ... < rho_M``; defaults to the
            scenario's ramp thresholds.
    """
    rho = _ramp_powers(s, thresholds)
    probs = np.asarray(phase_probs, dtype=float)
    if probs.shape != (len(rho),):
        raise ValueError(f"expected {len(rho)} phase probabilities, got {probs.size}")
    if not 1 <= m <= len(rho):
        raise IndexError(f"phase index {m} outside 1..{len(rho)}")
    theta, eta = s.sinr_threshold, s.pathloss_exponent
    at = alpha_tilde(s)
    rho_m = rho[m - 1]
    p = math.exp(-s.noise * theta / rho_m)
    for rho_k, pk in zip(rho, probs):
        if pk == 0.0:
            continue
        z = theta if rho_k == rho_m else theta * rho_k / rho_m
        load = pk * at
        p *= inter_cell_lt(load, z, eta) * intra_cell_lt(load, z / (1.0 + z))
    return p


def success_ramping_all(s: NetworkScenario, phase_probs, thresholds=None) -> np.ndarray:
    """Vector ``p_1..p_M`` for a ramping activity profile."""
    M = len(_ramp_powers(s, thresholds))
    return np.array([success_ramping(s, phase_probs, m, thresholds) for m in range(1, M + 1)])


def success_for_profile(s: NetworkScenario, scheme: SchemeConfig, profile) -> np.ndarray:
    """Per-transmit-phase success probabilities for any scheme."""
    probs = np.atleast_1d(np.asarray(profile, dtype=float))
    if scheme.kind == "ramping":
        return success_ramping_all(s, probs, scheme.ramp_powers(s))
    if probs.size != 1:
        raise ValueError(f"{scheme.kind} activity takes a single probability")
    fn = success_backoff if scheme.kind == "backoff" else success_baseline
    return np.array([fn(s, float(probs[0]))])
