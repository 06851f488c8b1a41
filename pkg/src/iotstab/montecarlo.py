"""Spatiotemporal Monte Carlo simulation of the uplink random-access network.

Each realization drops BSs and devices as independent PPPs on a square
window, attaches every device to its nearest BS and then runs the slotted
protocol with per-device FCFS queues. Devices anywhere in the window
interfere; statistics come only from devices inside a disk around the
window centre.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _mckernel as K
from .scenario import NetworkScenario, SchemeConfig

__all__ = [
    "SimConfig",
    "SimStats",
    "FrozenStats",
    "EdgePolicy",
    "edge_policy",
    "draw_layout",
    "run",
    "run_frozen_activity",
    "default_threads",
]

THREADS_ENV = "IOTSTAB_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings (lengths in km).

    ``interference_radius`` caps the distance at which a transmitter is
    counted as interference at a BS; beyond ~1 km the neglected power is a
    small fraction of a percent of the success probability for the
    densities of interest.
    """

    window: float = 10.0
    measure_radius: float = 1.0
    warmup_slots: int = 200
    measured_slots: int = 500
    realizations: int = 20
    rng_seed: int = 0
    interference_radius: float = 1.0
    ring_capacity: int = 1024
    queue_cap: int = 10_000
    trace_len: int = 0
    threads: int | None = None

    def __post_init__(self):
        if not 0 < self.measure_radius < self.window / 2:
            raise ValueError("measure_radius must lie inside the window")
        if self.measured_slots < 1 or self.warmup_slots < 0:
            raise ValueError("slot counts must be positive")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if not 0 < self.interference_radius <= self.window:
            raise ValueError("interference_radius must lie in (0, window]")


@dataclass(frozen=True)
class EdgePolicy:
    """Everyone in the window interferes; only the central disk is measured."""

    window: float
    measure_radius: float

    def __post_init__(self):
        if not 0 < self.measure_radius < self.window / 2:
            raise ValueError("measurement disk must lie strictly inside the window")

    def measured(self, xy: np.ndarray) -> np.ndarray:
        return np.hypot(xy[:, 0], xy[:, 1]) < self.measure_radius


def edge_policy(window: float, measure_radius: float) -> EdgePolicy:
    return EdgePolicy(window, measure_radius)


@dataclass
class Layout:
    bs_xy: np.ndarray
    dev_xy: np.ndarray
    serve: np.ndarray
    r_eta: np.ndarray
    measured_idx: np.ndarray
    n_meas: int
    rejected: int


def draw_layout(s: NetworkScenario, sim: SimConfig, rng: np.random.Generator) -> Layout:
    """BS and device PPPs with nearest-BS association.

    Realizations without any BS are redrawn and counted in ``rejected``.
    Measured devices are sorted first so their indices are ``0..n_meas-1``.
    """
    area = sim.window ** 2
    half = sim.window / 2
    rejected = 0
    while True:
        n_bs = rng.poisson(s.bs_density * area)
        n_dev = rng.poisson(s.device_density * area)
        bs_xy = rng.uniform(-half, half, (n_bs, 2))
        dev_xy = rng.uniform(-half, half, (n_dev, 2))
        if n_bs > 0:
            break
        rejected += 1
    dist, serve = cKDTree(bs_xy).query(dev_xy) if n_dev else (np.zeros(0), np.zeros(0, int))
    meas = edge_policy(sim.window, sim.measure_radius).measured(dev_xy)
    order = np.argsort(~meas, kind="stable")
    dev_xy, serve, dist, meas = dev_xy[order], serve[order], dist[order], meas[order]
    n_meas = int(meas.sum())
    measured_idx = np.where(meas, np.arange(n_dev), -1).astype(np.int64)
    return Layout(bs_xy, np.ascontiguousarray(dev_xy), serve.astype(np.int64),
                  dist ** s.pathloss_exponent, measured_idx, n_meas, rejected)


def _scheme_args(s: NetworkScenario, scheme: SchemeConfig):
    rho = np.asarray(scheme.ramp_powers(s), dtype=float)
    if scheme.kind == "ramping":
        return rho, K.RAMPING, 0, 1.0
    if scheme.kind == "backoff":
        return rho, K.BACKOFF, scheme.backoff_slots, scheme.backoff_prob
    return rho, K.BASELINE, 0, 1.0


def _seeds(sim: SimConfig):
    children = np.random.SeedSequence(sim.rng_seed).spawn(sim.realizations)
    return [(np.random.default_rng(c), int(c.generate_state(1, dtype=np.uint32)[0])) for c in children]


def _one(s, scheme, sim, rng, seed, frozen_probs):
    lay = draw_layout(s, sim, rng)
    rho, kind, n_det, q_back = _scheme_args(s, scheme)
    frozen = frozen_probs is not None
    fp = np.zeros(rho.size) if frozen_probs is None else np.asarray(frozen_probs, float)
    out = K.run_realization(
        seed, lay.bs_xy, lay.dev_xy, lay.serve, lay.r_eta, lay.measured_idx, lay.n_meas,
        float(sim.window), int(s.codes_per_bs), float(s.arrival_prob), rho, kind, n_det,
        float(q_back), float(s.noise), float(s.sinr_threshold), float(s.pathloss_exponent),
        float(sim.interference_radius), int(sim.warmup_slots), int(sim.measured_slots),
        frozen, fp, int(sim.ring_capacity), int(sim.queue_cap), int(sim.trace_len),
    )
    return out, lay.rejected


def _run_all(s, scheme, sim, frozen_probs):
    jobs = _seeds(sim)
    threads = sim.threads or default_threads()
    if threads == 1:
        return [_one(s, scheme, sim, rng, seed, frozen_probs) for rng, seed in jobs]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda j: _one(s, scheme, sim, j[0], j[1], frozen_probs), jobs))


def _mean_se(values):
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


def _ratio(num, den):
    return num / den if den > 0 else math.nan


@dataclass
class SimStats:
    """Across-realization means with standard errors (``*_se``).

    Ratios are formed per realization and then averaged. Queue statistics
    are ``nan`` when any realization hit the queue cap; waiting-time
    statistics are ``nan`` when a measured device outgrew its arrival log.
    """

    p: float
    p_se: float
    p_phase: np.ndarray
    p_phase_se: np.ndarray
    mean_queue: float
    mean_queue_se: float
    mean_wait: float
    mean_wait_se: float
    mean_sojourn: float
    mean_sojourn_se: float
    attempts_per_delivery: float
    attempts_per_delivery_se: float
    delay: float
    delay_se: float
    idle_fraction: float
    idle_fraction_se: float
    mean_backoff: float
    mean_backoff_se: float
    overflow: bool
    realizations: int
    rejected: int
    measured_devices: float
    traces: list = field(default_factory=list, repr=False)
    final_queues: list = field(default_factory=list, repr=False)

    def fingerprint(self) -> str:
        """Hash of every trajectory-level output, for bitwise comparisons."""
        h = hashlib.sha256()
        for tr in self.traces:
            h.update(np.ascontiguousarray(tr).tobytes())
        for fq in self.final_queues:
            h.update(np.ascontiguousarray(fq).tobytes())
        for name in ("p", "mean_queue", "mean_wait", "delay", "idle_fraction"):
            h.update(np.float64(getattr(self, name)).tobytes())
        return h.hexdigest()

    def as_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k in ("traces", "final_queues"):
                continue
            out[k] = [float(x) for x in v] if isinstance(v, np.ndarray) else v
        return out


def run(s: NetworkScenario, scheme: SchemeConfig, sim: SimConfig = SimConfig()) -> SimStats:
    """Full protocol simulation with queues."""
    results = _run_all(s, scheme, sim, None)
    per = {k: [] for k in ("p", "q", "w", "t", "apd", "d", "idle", "bo")}
    phase_att, phase_suc = [], []
    overflow = ring_over = False
    for (c, pp, _, _), _rej in results:
        overflow |= bool(c[K.C_OVERFLOW])
        ring_over |= bool(c[K.C_RING_OVERFLOW])
        n_meas = c[K.C_MEASURED]
        per["p"].append(_ratio(c[K.C_SUCCESS], c[K.C_ATTEMPTS]))
        per["q"].append(_ratio(c[K.C_QSUM], n_meas * c[K.C_BOUNDARIES]))
        per["w"].append(_ratio(c[K.C_WSUM], c[K.C_WCOUNT]))
        per["t"].append(_ratio(c[K.C_TSUM], c[K.C_TCOUNT]))
        per["apd"].append(_ratio(c[K.C_ATTEMPTS], c[K.C_DELIV]))
        per["d"].append(_ratio(c[K.C_BUSY], c[K.C_DELIV]))
        per["idle"].append(_ratio(c[K.C_IDLE], n_meas * c[K.C_BOUNDARIES]))
        per["bo"].append(_ratio(c[K.C_BACKOFF], c[K.C_FAIL]))
        phase_att.append(pp[0])
        phase_suc.append(pp[1])
    stats = {k: _mean_se(v) for k, v in per.items()}
    if overflow:
        stats["q"] = stats["w"] = stats["t"] = (math.nan, math.nan)
    if ring_over:
        stats["w"] = stats["t"] = (math.nan, math.nan)
    pp_mean, pp_se = _phase_stats(phase_att, phase_suc)
    return SimStats(
        *stats["p"], pp_mean, pp_se, *stats["q"], *stats["w"], *stats["t"], *stats["apd"],
        *stats["d"], *stats["idle"], *stats["bo"], overflow, len(results),
        sum(r for _, r in results),
        float(np.mean([c[K.C_MEASURED] for (c, *_), _ in results])),
        [tr for (_, _, tr, _), _ in results], [fq for (_, _, _, fq), _ in results],
    )


def _phase_stats(att, suc):
    att, suc = np.array(att), np.array(suc)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(att > 0, suc / np.where(att > 0, att, 1.0), np.nan)
    means = np.array([_mean_se(col)[0] for col in ratio.T])
    ses = np.array([_mean_se(col)[1] for col in ratio.T])
    return means, ses


@dataclass
class FrozenStats:
    """Empirical success probability under i.i.d. activity."""

    p: float
    p_se: float
    p_phase: np.ndarray
    p_phase_se: np.ndarray
    attempts: float
    realizations: int
    traces: list = field(default_factory=list, repr=False)


def run_frozen_activity(s: NetworkScenario, scheme: SchemeConfig, activity,
                        sim: SimConfig = SimConfig()) -> FrozenStats:
    """Every device transmits each slot in phase ``m`` with probability ``activity[m]``.

    There are no queues: this isolates the interference model from the
    queue dynamics. For backoff only the transmit-phase probability is used.
    """
    probs = np.atleast_1d(np.asarray(activity, dtype=float))
    n_tx = len(scheme.ramp_powers(s))
    if probs.size != n_tx:
        raise ValueError(f"expected {n_tx} activity probabilities, got {probs.size}")
    if (probs < 0).any() or probs.sum() > 1 + 1e-12:
        raise ValueError("activity probabilities must be non-negative and sum to at most one")
    results = _run_all(s, scheme, sim, probs)
    att = [pp[0] for (_, pp, _, _), _ in results]
    suc = [pp[1] for (_, pp, _, _), _ in results]
    overall = [_ratio(s_.sum(), a_.sum()) for a_, s_ in zip(att, suc)]
    p, p_se = _mean_se(overall)
    pm, pse = _phase_stats(att, suc)
    return FrozenStats(p, p_se, pm, pse, float(np.sum(att)), len(results),
                       [tr for (_, _, tr, _), _ in results])
