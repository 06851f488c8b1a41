"""Network scenario and access-scheme parameters.

All quantities are kept in linear units internally (mW for powers, plain
ratios for thresholds). Decibel values only appear when reading or writing
configuration files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

__all__ = [
    "ScenarioError",
    "NetworkScenario",
    "SchemeConfig",
    "load_scenario",
    "dump_scenario",
    "alpha_tilde",
    "to_db",
    "to_linear",
    "DEFAULT_RAMP_DBM",
]

# -90 dBm .. -70 dBm in 4 dB steps (six thresholds).
DEFAULT_RAMP_DBM = (-90.0, -86.0, -82.0, -78.0, -74.0, -70.0)


class ScenarioError(ValueError):
    """Raised for malformed configuration text or invalid parameter values."""


def to_linear(db: float) -> float:
    """dB (or dBm) to linear (or mW)."""
    return 10.0 ** (db / 10.0)


def to_db(x: float) -> float:
    """Linear (or mW) to dB (or dBm)."""
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NetworkScenario:
    """Physical and MAC-layer parameters of one network instance.

    Attributes:
        bs_density: base stations per km^2.
        device_density: IoT devices per km^2.
        codes_per_bs: orthogonal pseudo codes available at every BS.
        pathloss_exponent: power-law exponent, must exceed 2.
        power_threshold: received-power target of channel inversion (mW).
        noise: noise power (mW).
        sinr_threshold: SINR detection threshold (linear).
        arrival_prob: geometric packet arrival probability per slot.
        ramp_thresholds: strictly increasing power targets (mW) used by the
            power-ramping scheme; empty when not configured.
    """

    bs_density: float
    device_density: float
    codes_per_bs: int
    pathloss_exponent: float
    power_threshold: float
    noise: float
    sinr_threshold: float
    arrival_prob: float
    ramp_thresholds: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.bs_density > 0:
            raise ScenarioError("bs_density: must be positive")
        if not self.device_density >= 0:
            raise ScenarioError("device_density: must be non-negative")
        if int(self.codes_per_bs) != self.codes_per_bs or self.codes_per_bs < 1:
            raise ScenarioError("codes_per_bs: must be a positive integer")
        if not self.pathloss_exponent > 2:
            raise ScenarioError("pathloss_exponent: pathloss exponent must exceed 2")
        if not self.power_threshold > 0:
            raise ScenarioError("power_threshold: must be positive")
        if not self.noise > 0:
            raise ScenarioError("noise: must be positive")
        if not self.sinr_threshold > 0:
            raise ScenarioError("sinr_threshold: must be positive")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ScenarioError("arrival_prob: must lie in [0, 1]")
        ramps = tuple(float(r) for r in self.ramp_thresholds)
        if any(not r > 0 for r in ramps):
            raise ScenarioError("ramp_thresholds: all powers must be positive")
        if any(b <= a for a, b in zip(ramps, ramps[1:])):
            raise ScenarioError("ramp_thresholds: must be strictly increasing")
        object.__setattr__(self, "codes_per_bs", int(self.codes_per_bs))
        object.__setattr__(self, "ramp_thresholds", ramps)

    @property
    def alpha_tilde(self) -> float:
        return alpha_tilde(self)

    @property
    def theta_db(self) -> float:
        return to_db(self.sinr_threshold)

    def replace(self, **changes) -> "NetworkScenario":
        return dataclasses.replace(self, **changes)

    def with_alpha_tilde(self, value: float) -> "NetworkScenario":
        """Same scenario with the device density rescaled to hit ``value``."""
        return self.replace(device_density=value * self.bs_density * self.codes_per_bs)

    def with_theta_db(self, theta_db: float) -> "NetworkScenario":
        return self.replace(sinr_threshold=to_linear(theta_db))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ramp_thresholds"] = list(self.ramp_thresholds)
        return d

    def digest(self) -> str:
        """Short stable hash of the resolved parameters."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def reference_defaults(
        cls,
        alpha_tilde: float = 4.0,
        theta_db: float = -10.0,
        arrival_prob: float = 0.1,
    ) -> "NetworkScenario":
        """Evaluation setup: 10 BS/km^2, 64 codes, eta=4, rho=sigma^2=-90 dBm."""
        return cls(
            bs_density=10.0,
            device_density=alpha_tilde * 10.0 * 64,
            codes_per_bs=64,
            pathloss_exponent=4.0,
            power_threshold=to_linear(-90.0),
            noise=to_linear(-90.0),
            sinr_threshold=to_linear(theta_db),
            arrival_prob=arrival_prob,
            ramp_thresholds=tuple(to_linear(x) for x in DEFAULT_RAMP_DBM),
        )


def alpha_tilde(s: NetworkScenario) -> float:
    """Mean number of devices per BS sharing one pseudo code."""
    return s.device_density / (s.bs_density * s.codes_per_bs)


@dataclass(frozen=True)
class SchemeConfig:
    """Random-access scheme: ``baseline``, ``ramping`` or ``backoff``.

    ``thresholds`` (mW) only applies to ramping; an empty tuple means "use
    the scenario's ramp thresholds". ``backoff_slots`` (N) and
    ``backoff_prob`` (q) only apply to backoff.
    """

    kind: str = "baseline"
    thresholds: tuple[float, ...] = ()
    backoff_slots: int = 0
    backoff_prob: float = 1.0

    def __post_init__(self):
        if self.kind not in ("baseline", "ramping", "backoff"):
            raise ScenarioError(f"scheme: unknown variant {self.kind!r}")
        if int(self.backoff_slots) != self.backoff_slots or self.backoff_slots < 0:
            raise ScenarioError("backoff_slots: must be a non-negative integer")
        if not 0.0 < self.backoff_prob <= 1.0:
            raise ScenarioError("backoff_prob: must lie in (0, 1]")
        ths = tuple(float(t) for t in self.thresholds)
        if any(b <= a for a, b in zip(ths, ths[1:])):
            raise ScenarioError("thresholds: must be strictly increasing")
        object.__setattr__(self, "thresholds", ths)
        object.__setattr__(self, "backoff_slots", int(self.backoff_slots))

    @classmethod
    def baseline(cls) -> "SchemeConfig":
        return cls("baseline")

    @classmethod
    def ramping(cls, thresholds=()) -> "SchemeConfig":
        return cls("ramping", thresholds=tuple(thresholds))

    @classmethod
    def backoff(cls, n: int, q: float) -> "SchemeConfig":
        return cls("backoff", backoff_slots=n, backoff_prob=q)

    def ramp_powers(self, s: NetworkScenario) -> tuple[float, ...]:
        """Power targets per transmission phase for scenario ``s``."""
        if self.kind != "ramping":
            return (s.power_threshold,)
        ths = self.thresholds or s.ramp_thresholds
        if not ths:
            raise ScenarioError("ramp_thresholds: ramping scheme needs at least one threshold")
        return ths

    def label(self) -> str:
        if self.kind == "backoff":
            return f"backoff(N={self.backoff_slots},q={self.backoff_prob:g})"
        return self.kind


# key -> (field, kind); kind is "power", "ratio", "float", "int", "powers"
_KEYS = {
    "bs_density": ("bs_density", "float"),
    "device_density": ("device_density", "float"),
    "codes_per_bs": ("codes_per_bs", "int"),
    "pathloss_exponent": ("pathloss_exponent", "float"),
    "power_threshold": ("power_threshold", "power"),
    "noise": ("noise", "power"),
    "sinr_threshold": ("sinr_threshold", "ratio"),
    "arrival_prob": ("arrival_prob", "float"),
    "ramp_thresholds": ("ramp_thresholds", "powers"),
    "alpha_tilde": (None, "float"),
}

_POWER_UNITS = {"dbm": to_linear, "mw": float}
_RATIO_UNITS = {"db": to_linear, "linear": float}
_PLAIN_UNITS = {"per_km2", "linear", "count", ""}


def _convert(key: str, kind: str, tokens: list[str]):
    unit = ""
    if len(tokens) > 1 and not _is_number(tokens[-1]):
        unit = tokens[-1].lower()
        tokens = tokens[:-1]
    if not tokens:
        raise ScenarioError(f"{key}: missing value")
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ScenarioError(f"{key}: cannot parse {' '.join(tokens)!r}") from None
    if kind == "powers":
        if unit not in _POWER_UNITS:
            raise ScenarioError(f"{key}: unit must be dBm or mW")
        return tuple(_POWER_UNITS[unit](v) for v in values)
    if len(values) != 1:
        raise ScenarioError(f"{key}: expected a single value")
    (v,) = values
    if kind == "power":
        if unit not in _POWER_UNITS:
            raise ScenarioError(f"{key}: unit must be dBm or mW")
        return _POWER_UNITS[unit](v)
    if kind == "ratio":
        if unit not in _RATIO_UNITS:
            raise ScenarioError(f"{key}: unit must be dB or linear")
        return _RATIO_UNITS[unit](v)
    if unit not in _PLAIN_UNITS:
        raise ScenarioError(f"{key}: unexpected unit {unit!r}")
    if kind == "int":
        if v != int(v):
            raise ScenarioError(f"{key}: must be an integer")
        return int(v)
    return v


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_scenario(config_text: str) -> NetworkScenario:
    """Parse a flat ``key = value [unit]`` document into a scenario.

    Powers take ``dBm`` or ``mW``; ``sinr_threshold`` takes ``dB`` or
    ``linear``. ``alpha_tilde`` may replace ``device_density``. Blank lines
    and ``#`` comments are ignored; unknown or repeated keys are errors.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(config_text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value [unit]'")
        key, rhs = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise ScenarioError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ScenarioError(f"{key}: given twice (line {lineno})")
        values[key] = _convert(key, _KEYS[key][1], rhs.replace(",", " ").split())

    alpha = values.pop("alpha_tilde", None)
    if alpha is not None:
        if "device_density" in values:
            raise ScenarioError("alpha_tilde: conflicts with device_density")
        if "bs_density" not in values or "codes_per_bs" not in values:
            raise ScenarioError("alpha_tilde: needs bs_density and codes_per_bs")
        values["device_density"] = alpha * values["bs_density"] * values["codes_per_bs"]

    required = [f.name for f in dataclasses.fields(NetworkScenario) if f.name != "ramp_thresholds"]
    missing = [k for k in required if k not in values]
    if missing:
        raise ScenarioError(f"{missing[0]}: missing from configuration")
    return NetworkScenario(**values)


def dump_scenario(s: NetworkScenario) -> str:
    """Inverse of :func:`load_scenario` (powers in dBm, threshold in dB)."""
    lines = [
        f"bs_density = {s.bs_density!r} per_km2",
        f"device_density = {s.device_density!r} per_km2",
        f"codes_per_bs = {s.codes_per_bs}",
        f"pathloss_exponent = {s.pathloss_exponent!r}",
        f"power_threshold = {to_db(s.power_threshold)!r} dBm",
        f"noise = {to_db(s.noise)!r} dBm",
        f"sinr_threshold = {to_db(s.sinr_threshold)!r} dB",
        f"arrival_prob = {s.arrival_prob!r}",
    ]
    if s.ramp_thresholds:
        lines.append("ramp_thresholds = " + " ".join(repr(to_db(r)) for r in s.ramp_thresholds) + " dBm")
    return "\n".join(lines) + "\n"
