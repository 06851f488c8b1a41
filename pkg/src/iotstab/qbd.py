"""Discrete-time Geo/PH/1 queue solved as a quasi-birth-death chain.

Levels count buffered packets (the one in service included); phases are the
states of the phase-type service law. Level 0 is a single idle state.
Transitions per slot, with arrival probability ``a`` and ``abar = 1 - a``::

    B  = abar          idle -> idle
    C  = a * beta      idle -> level 1
    E  = abar * s      level 1 -> idle
    A0 = a * S         level i -> i + 1
    A1 = a*s*beta + abar*S
    A2 = abar * s * beta
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import SchemeConfig

__all__ = [
    "QbdError",
    "PhService",
    "QbdBlocks",
    "QbdSolution",
    "build_ph",
    "drift_vector",
    "unstable_phases",
    "qbd_blocks",
    "is_stable",
    "solve_r_matrix",
    "iterate_r_matrix",
    "solve_boundary",
    "marginal_phases",
    "solve_qbd",
    "level_masses",
    "mean_queue_length",
    "mean_waiting_time",
    "waiting_time_pmf",
    "mean_service_delay",
    "mean_backoff_per_failure",
]


class QbdError(ArithmeticError):
    """Numerical failure or misuse of the QBD solver."""


@dataclass(frozen=True)
class PhService:
    """Phase-type service law ``(beta, S)`` with exit vector ``s = e - S e``.

    ``success`` holds the per-phase success probability of a transmission
    attempt (zero in phases where the device stays silent) and ``transmit``
    marks the transmitting phases (all of them by default).
    """

    beta: np.ndarray
    S: np.ndarray
    success: np.ndarray
    transmit: np.ndarray | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        succ = np.asarray(self.success, dtype=float)
        n = S.shape[0]
        if S.shape != (n, n) or beta.shape != (n,) or succ.shape != (n,):
            raise QbdError("dimension mismatch between beta, S and success")
        if (S < -1e-15).any() or (S > 1 + 1e-15).any():
            raise QbdError("S entries must lie in [0, 1]")
        if (S.sum(axis=1) > 1 + 1e-12).any():
            raise QbdError("S must be sub-stochastic")
        if abs(beta.sum() - 1.0) > 1e-12:
            raise QbdError("beta must sum to one")
        tx = np.ones(n, dtype=bool) if self.transmit is None else np.asarray(self.transmit, dtype=bool)
        if tx.shape != (n,):
            raise QbdError("dimension mismatch in transmit mask")
        for name, v in (("beta", beta), ("S", S), ("success", succ), ("transmit", tx)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def s(self) -> np.ndarray:
        return np.clip(1.0 - self.S.sum(axis=1), 0.0, 1.0)


def build_ph(scheme: SchemeConfig, success_probs) -> PhService:
    """Service law of one scheme given its per-attempt success probabilities.

    Args:
        scheme: the random-access scheme.
        success_probs: ``p`` (baseline and backoff) or ``p_1..p_M`` (ramping).

    Returns:
        Baseline ``S = [1 - p]``. Ramping: failure moves phase m to m + 1 and
        phase M wraps to phase 1. Backoff: after a failure the device waits
        ``N`` deterministic slots, then leaves the probabilistic state with
        probability ``q`` per slot.
    """
    p = np.atleast_1d(np.asarray(success_probs, dtype=float))
    if ((p < 0) | (p > 1)).any():
        raise QbdError("success probabilities must lie in [0, 1]")
    kind = scheme.kind
    if kind == "baseline" or (kind == "ramping" and p.size == 1):
        if p.size != 1:
            raise QbdError(f"{kind} takes a single success probability, got {p.size}")
        return PhService(np.ones(1), np.array([[1.0 - p[0]]]), p.copy())
    if kind == "ramping":
        m = p.size
        S = np.zeros((m, m))
        pbar = 1.0 - p
        S[np.arange(m - 1), np.arange(1, m)] = pbar[:-1]
        S[m - 1, 0] = pbar[-1]
        beta = np.zeros(m)
        beta[0] = 1.0
        return PhService(beta, S, p.copy())
    # backoff
    if p.size != 1:
        raise QbdError(f"backoff takes a single success probability, got {p.size}")
    n_det, q = scheme.backoff_slots, scheme.backoff_prob
    pbar = 1.0 - p[0]
    n = n_det + 2
    S = np.zeros((n, n))
    last = n - 1
    if n_det == 0:
        S[0, 0] = pbar * q
        S[0, last] = pbar * (1.0 - q)
    else:
        S[0, 1] = pbar
        for i in range(1, n_det):
            S[i, i + 1] = 1.0
        S[n_det, 0] = q
        S[n_det, last] = 1.0 - q
    S[last, 0] = q
    S[last, last] = 1.0 - q
    beta = np.zeros(n)
    beta[0] = 1.0
    succ = np.zeros(n)
    succ[0] = p[0]
    return PhService(beta, S, succ, transmit=beta > 0)


def drift_vector(ph: PhService) -> np.ndarray:
    """Stationary vector of the phase process ``A = s beta + S``."""
    A = np.outer(ph.s, ph.beta) + ph.S
    n = ph.n
    M = (A - np.eye(n)).T
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise QbdError("phase process is not irreducible") from exc
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def unstable_phases(ph: PhService) -> np.ndarray:
    """Phase distribution of a saturated (never empty) device."""
    return drift_vector(ph)


@dataclass(frozen=True)
class QbdBlocks:
    """Transition blocks of the Geo/PH/1 chain."""

    ph: PhService
    a: float
    B: float = field(init=False)
    C: np.ndarray = field(init=False)
    E: np.ndarray = field(init=False)
    A0: np.ndarray = field(init=False)
    A1: np.ndarray = field(init=False)
    A2: np.ndarray = field(init=False)

    def __post_init__(self):
        a, ph = float(self.a), self.ph
        if not 0.0 <= a <= 1.0:
            raise QbdError("arrival probability must lie in [0, 1]")
        abar = 1.0 - a
        sb = np.outer(ph.s, ph.beta)
        set_ = object.__setattr__
        set_(self, "B", abar)
        set_(self, "C", a * ph.beta)
        set_(self, "E", abar * ph.s)
        set_(self, "A0", a * ph.S)
        set_(self, "A1", a * sb + abar * ph.S)
        set_(self, "A2", abar * sb)


def qbd_blocks(ph: PhService, a: float) -> QbdBlocks:
    return QbdBlocks(ph, a)


def is_stable(ph: PhService, a: float) -> tuple[bool, float, float]:
    """Mean-drift test.

    Returns ``(stable, down, up)`` with ``down = pi A2 e`` and
    ``up = pi A0 e``. Stability needs ``down > up`` strictly; an empty
    arrival stream is always stable.
    """
    pi = drift_vector(ph)
    down = (1.0 - a) * float(pi @ ph.s)
    up = a * float(pi @ ph.S.sum(axis=1))
    return (a == 0.0 or down > up), down, up


def solve_r_matrix(blocks: QbdBlocks) -> np.ndarray:
    """Minimal solution of ``R = A0 + R A1 + R^2 A2`` via the rank-one form.

    Because ``A2`` has rank one the matrix ``G`` equals ``e beta`` and
    ``R = a S (I - a s beta - abar S - a S e beta)^{-1}``.
    """
    ph, a = blocks.ph, blocks.a
    n = ph.n
    e = np.ones(n)
    M = np.eye(n) - a * np.outer(ph.s, ph.beta) - (1.0 - a) * ph.S - a * np.outer(ph.S @ e, ph.beta)
    try:
        R = np.linalg.solve(M.T, (a * ph.S).T).T
    except np.linalg.LinAlgError as exc:
        raise QbdError("singular matrix in the R formula") from exc
    return R


def iterate_r_matrix(blocks: QbdBlocks, tol: float = 1e-15, max_iter: int = 100_000) -> np.ndarray:
    """Natural fixed-point iteration ``R <- A0 + R A1 + R^2 A2`` from zero."""
    R = np.zeros_like(blocks.A0)
    for _ in range(max_iter):
        R_new = blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2
        if np.max(np.abs(R_new - R)) < tol:
            return R_new
        R = R_new
    raise QbdError("R iteration did not converge")


def solve_boundary(blocks: QbdBlocks, R: np.ndarray) -> tuple[float, np.ndarray]:
    """Idle probability ``x0`` and level-1 vector ``x1``."""
    n = blocks.ph.n
    P = np.empty((n + 1, n + 1))
    P[0, 0] = blocks.B
    P[0, 1:] = blocks.C
    P[1:, 0] = blocks.E
    P[1:, 1:] = blocks.A1 + R @ blocks.A2
    M = (P - np.eye(n + 1)).T
    try:
        tail = np.linalg.solve(np.eye(n) - R, np.ones(n))
    except np.linalg.LinAlgError as exc:
        raise QbdError("I - R is singular") from exc
    M[0, 0] = 1.0
    M[0, 1:] = tail
    rhs = np.zeros(n + 1)
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise QbdError("singular boundary system") from exc
    return float(x[0]), x[1:]


def marginal_phases(x1: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``Pi = x1 (I - R)^{-1}``: probability of being busy in each phase."""
    n = R.shape[0]
    return np.linalg.solve((np.eye(n) - R).T, x1)


@dataclass(frozen=True)
class QbdSolution:
    """Stationary solution; ``x1`` and ``R`` are ``None`` when unstable."""

    stable: bool
    x0: float
    x1: np.ndarray | None
    R: np.ndarray | None
    Pi: np.ndarray
    drift: tuple[float, float]
    ph: PhService
    a: float


def solve_qbd(ph: PhService, a: float) -> QbdSolution:
    stable, down, up = is_stable(ph, a)
    if not stable:
        return QbdSolution(False, 0.0, None, None, unstable_phases(ph), (down, up), ph, a)
    blocks = qbd_blocks(ph, a)
    R = solve_r_matrix(blocks)
    if R.size and np.max(np.abs(np.linalg.eigvals(R))) >= 1.0:
        raise QbdError("spectral radius of R is not below one")
    x0, x1 = solve_boundary(blocks, R)
    Pi = marginal_phases(x1, R)
    return QbdSolution(True, x0, x1, R, Pi, (down, up), ph, a)


def _require_stable(sol: QbdSolution):
    if not sol.stable:
        raise QbdError("metric undefined for an unstable queue")


def level_masses(sol: QbdSolution, tail: float = 1e-16, max_levels: int = 1_000_000) -> np.ndarray:
    """Rows ``x_1, x_2, ...`` until the remaining mass drops below ``tail``."""
    _require_stable(sol)
    n = sol.ph.n
    remaining = np.linalg.inv(np.eye(n) - sol.R).sum(axis=1)
    R = sol.R
    rows = []
    x = sol.x1
    for _ in range(max_levels):
        rows.append(x)
        x = x @ R
        if x @ remaining < tail:
            return np.array(rows)
    raise QbdError("level truncation not reached within max_levels")


def mean_queue_length(sol: QbdSolution) -> float:
    """``E[Q_L] = x1 (I - R)^{-2} e``."""
    _require_stable(sol)
    n = sol.ph.n
    y = np.linalg.solve(np.eye(n) - sol.R, np.ones(n))
    y = np.linalg.solve(np.eye(n) - sol.R, y)
    return float(sol.x1 @ y)


def _waiting_sweep(sol: QbdSolution, tail: float, max_slots: int, keep_pmf: bool):
    """Propagate the work ahead of an arriving packet slot by slot.

    State is (packets still to finish, current phase). Each slot the head
    packet either leaves (its mass moves to the next packet's first phase)
    or moves within ``S``.
    """
    ph = sol.ph
    levels = level_masses(sol)
    y = levels.copy()
    S, s, beta = ph.S, ph.s, ph.beta
    cum = sol.x0
    pmf = [sol.x0] if keep_pmf else None
    mean = 0.0
    j = 0
    beta_row = beta[None, :]
    while cum <= 1.0 - tail:
        if j >= max_slots:
            raise QbdError("waiting-time truncation not reached within max_slots")
        j += 1
        done = y @ s
        y = y @ S
        y[:-1] += done[1:, None] * beta_row
        head = float(done[0])
        mean += j * head
        cum += head
        if keep_pmf:
            pmf.append(head)
    return j, y, mean, pmf


def waiting_time_pmf(sol: QbdSolution, tail: float = 1e-10, max_slots: int = 10_000_000) -> np.ndarray:
    """``P{W = j}`` for ``j = 0..J`` where ``P{W <= J}`` first exceeds ``1 - tail``."""
    _require_stable(sol)
    return np.array(_waiting_sweep(sol, tail, max_slots, True)[3])


def mean_waiting_time(sol: QbdSolution, tail: float = 1e-6, max_slots: int = 10_000_000) -> float:
    """Mean queueing delay (slots from arrival until service start).

    The series is summed until ``P{W <= J} > 1 - tail``; the residual mass is
    then added exactly using the mean remaining service times, so ``tail``
    only trades explicit terms for the closed remainder.
    """
    _require_stable(sol)
    if sol.a == 0.0:
        return 0.0
    ph = sol.ph
    J, y, mean, _ = _waiting_sweep(sol, tail, max_slots, False)
    t = np.linalg.solve(np.eye(ph.n) - ph.S, np.ones(ph.n))
    m = float(ph.beta @ t)
    k = np.arange(len(y))
    mass = y.sum(axis=1)
    mean += float(J * mass.sum() + (y @ t).sum() + m * (k * mass).sum())
    return mean


def mean_service_delay(Pi, x0: float, success_probs, transmit=None) -> tuple[float, float]:
    """Mean busy slots per delivered packet and per-attempt success rate.

    Args:
        Pi: marginal phase probabilities.
        x0: idle probability.
        success_probs: per-phase success probability, zero in silent phases.
        transmit: mask of transmitting phases; all phases by default.

    Returns:
        ``(D, P_success)`` with ``D = (1 - x0) / sum(Pi * p)`` and
        ``P_success`` the success probability averaged over transmitting
        phases.
    """
    Pi = np.asarray(Pi, dtype=float)
    p = np.asarray(success_probs, dtype=float)
    rate = float(Pi @ p)
    busy = 1.0 - x0
    if busy <= 0.0:
        return 1.0, float(p[0]) if p.size else float("nan")
    if rate <= 0.0:
        raise QbdError("no service possible: zero success rate")
    tx = busy if transmit is None else float(Pi[np.asarray(transmit, dtype=bool)].sum())
    return busy / rate, rate / tx


def mean_backoff_per_failure(ph: PhService) -> float:
    """Expected silent slots spent after a failed attempt before retrying."""
    silent = ~ph.transmit
    if not silent.any():
        return 0.0
    Ss = ph.S[np.ix_(silent, silent)]
    t = np.linalg.solve(np.eye(Ss.shape[0]) - Ss, np.ones(Ss.shape[0]))
    # entry distribution into the silent block after one failure
    entry = ph.S[0, silent]
    fail = 1.0 - ph.success[0]
    if fail <= 0:
        return 0.0
    return float(entry @ t) / fail
