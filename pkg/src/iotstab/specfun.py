"""Special functions used by the interference closed forms.

The only hypergeometric family needed is

    psi(N, eta, z) = 2F1(1, N - 2/eta; N + 1 - 2/eta; -z),   z >= 0,

which is evaluated from three convergent representations depending on the
size of ``z``. The neighbour-count law is a negative binomial with the
Voronoi shape constant ``c``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _sint
from scipy.special import gammaln

__all__ = [
    "VORONOI_C",
    "SpecialFunctionError",
    "Quadrature",
    "gauss_2f1_interference",
    "neighbor_pmf",
    "neighbor_pmf_array",
    "integrate",
]

# Shape of the gamma fit to the area of a Poisson-Voronoi cell.
VORONOI_C = 3.575

_MAX_TERMS = 2000
_EPS = 1e-17


class SpecialFunctionError(ArithmeticError):
    """A series or quadrature failed to reach its tolerance."""


def _series(first_ratio, x: float) -> float:
    """Sum a hypergeometric series given the term-ratio function."""
    total, term = 1.0, 1.0
    for k in range(_MAX_TERMS):
        term *= first_ratio(k) * x
        total += term
        if abs(term) <= _EPS * abs(total):
            return total
    raise SpecialFunctionError(f"hypergeometric series did not converge at x={x}")


def gauss_2f1_interference(eta: float, z: float, shift: int = 1) -> float:
    """psi(shift, eta, z) = 2F1(1, b; b + 1; -z) with b = shift - 2/eta.

    Args:
        eta: path-loss exponent, > 2.
        z: non-negative argument (the SINR threshold or a scaled version).
        shift: 1 or 2.

    Returns:
        Value in (0, 1], decreasing in ``z``.
    """
    if not eta > 2:
        raise ValueError("eta must exceed 2")
    if shift not in (1, 2):
        raise ValueError("shift must be 1 or 2")
    if z < 0 or not math.isfinite(z):
        raise ValueError("z must be finite and non-negative")
    b = shift - 2.0 / eta
    if z <= 0.5:
        # sum_k b/(b+k) (-z)^k
        return _series(lambda k: -(b + k) / (b + k + 1.0), z)
    w = z / (1.0 + z)
    if w <= 0.5:
        # Pfaff: (1+z)^{-b} 2F1(b, b; b+1; w)
        return (1.0 + z) ** (-b) * _series(
            lambda k: (b + k) ** 2 / ((b + k + 1.0) * (k + 1.0)), w
        )
    # Connection to 1 - w = 1/(1+z); c - a - b = 1 - b is never an integer here.
    u = 1.0 / (1.0 + z)
    lead = b * math.pi / math.sin(math.pi * b) * z ** (-b)
    tail = b / (b - 1.0) * u * _series(lambda k: (k + 1.0) / (2.0 - b + k), u)
    return lead + tail


def neighbor_pmf_array(n_max: int, device_density: float, bs_density: float,
                       c: float = VORONOI_C) -> np.ndarray:
    """P{N = n} for n = 0..n_max of the negative-binomial neighbour count.

    The mean is ``device_density / bs_density``.
    """
    n = np.arange(n_max + 1, dtype=float)
    if device_density == 0:
        out = np.zeros_like(n)
        out[0] = 1.0
        return out
    lam_c = bs_density * c
    logp = (
        gammaln(n + c) - gammaln(n + 1.0) - gammaln(c)
        + n * math.log(device_density) + c * math.log(lam_c)
        - (n + c) * math.log(device_density + lam_c)
    )
    return np.exp(logp)


def neighbor_pmf(n: int, device_density: float, bs_density: float,
                 c: float = VORONOI_C) -> float:
    """Probability that a typical cell holds exactly ``n`` other devices."""
    if n < 0:
        return 0.0
    return float(neighbor_pmf_array(n, device_density, bs_density, c)[n])


@dataclass(frozen=True)
class Quadrature:
    """Adaptive quadrature settings."""

    relative_tolerance: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not 0 < self.relative_tolerance <= 1e-3:
            raise ValueError("relative_tolerance must lie in (0, 1e-3]")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be at least 16")


def integrate(f, lower: float, upper: float, quad: Quadrature = Quadrature()) -> float:
    """Integrate ``f`` over [lower, upper]; ``upper`` may be ``inf``.

    Backed by QUADPACK (``scipy.integrate.quad``), which maps infinite
    ranges onto (0, 1]. Raises :class:`SpecialFunctionError` if the error
    estimate exceeds the requested relative tolerance.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _sint.IntegrationWarning)
        val, err = _sint.quad(
            f, lower, upper, epsabs=0.0, epsrel=quad.relative_tolerance,
            limit=quad.max_subdivisions,
        )
    # QUADPACK's estimate is pessimistic, so allow a factor of ten of slack.
    if err > 10 * quad.relative_tolerance * abs(val) + 1e-14:
        raise SpecialFunctionError(
            f"quadrature error {err:.3g} exceeds tolerance for value {val:.6g}"
        )
    return float(val)
