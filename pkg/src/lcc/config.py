"""Run configuration: one dataclass per pipeline stage.

A config file is TOML or JSON with optional tables ``lift``, ``cost``,
``dilation``, ``components`` and ``affinity``. Keys map one to one onto the
dataclass fields below; weights are written as three-element arrays.

    [lift]
    n_orientations = 16
    periodicity = "pi"

    [components]
    weights = [0.1, 1.0, 4.0]
    delta = 0.5
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .geometry import TWO_PI, MetricWeights

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def parse_periodicity(value) -> float:
    if isinstance(value, str):
        v = value.strip().lower()
        if v == "pi":
            return float(np.pi)
        if v == "2pi":
            return TWO_PI
    elif isinstance(value, (int, float)):
        for p in (np.pi, TWO_PI):
            if abs(value - p) < 1e-12:
                return float(p)
    raise InvalidArgumentError(f"periodicity must be 'pi' or '2pi', got {value!r}")


def periodicity_name(period: float) -> str:
    return "pi" if abs(period - np.pi) < 1e-12 else "2pi"


def _weights(value) -> MetricWeights:
    if isinstance(value, MetricWeights):
        return value
    if isinstance(value, str):
        return MetricWeights.parse(value)
    vals = list(value)
    if len(vals) != 3:
        raise InvalidArgumentError(f"weights need three entries, got {value!r}")
    return MetricWeights(*map(float, vals))


@dataclass(frozen=True)
class LiftConfig:
    n_orientations: int = 32
    periodicity: str = "pi"
    wavelet_size: int = 41
    spline_order: int = 2
    inflection: float = 0.6
    taper: float = 1.0
    smoothing_sigma: float = 0.0
    polarity: str = "abs"

    def __post_init__(self):
        if self.n_orientations < 4 or self.n_orientations % 2:
            raise InvalidArgumentError("n_orientations must be even and >= 4")
        if self.wavelet_size < 3 or self.wavelet_size % 2 == 0:
            raise InvalidArgumentError("wavelet_size must be odd and >= 3")
        parse_periodicity(self.periodicity)
        if not 0 < self.inflection <= 1 or self.taper <= 0 or self.smoothing_sigma < 0:
            raise InvalidArgumentError("need 0 < inflection <= 1, taper > 0 and smoothing_sigma >= 0")
        if self.polarity not in ("abs", "bright", "dark"):
            raise InvalidArgumentError(f"polarity must be abs, bright or dark, got {self.polarity!r}")

    @property
    def period(self) -> float:
        return parse_periodicity(self.periodicity)


@dataclass(frozen=True)
class CostConfig:
    lam: float = 100.0
    p: float = 3.0

    def __post_init__(self):
        if self.lam <= 0 or self.p <= 0:
            raise InvalidArgumentError("cost parameters lambda and p must be > 0")


@dataclass(frozen=True)
class DilationConfig:
    weights: MetricWeights = field(default_factory=lambda: MetricWeights(0.2, 1.5, 50.0))
    alpha: float = 1.3
    t: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.weights))
        if self.alpha < 1 or self.t < 0:
            raise InvalidArgumentError("dilation needs alpha >= 1 and t >= 0")


@dataclass(frozen=True)
class ComponentsConfig:
    weights: MetricWeights = field(default_factory=lambda: MetricWeights(0.1, 1.0, 4.0))
    delta: Optional[float] = None
    alpha: float = 1.0
    min_component_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.weights))
        if self.delta is not None and self.delta <= 0:
            raise InvalidArgumentError("delta must be > 0")
        if self.alpha != 1:
            raise InvalidArgumentError("component labeling is defined for alpha = 1 only")
        if self.min_component_size < 1:
            raise InvalidArgumentError("min_component_size must be >= 1")


@dataclass(frozen=True)
class AffinityConfig:
    weights: MetricWeights = field(default_factory=lambda: MetricWeights(0.5, 2.0, 0.5))
    alpha: float = 2.0
    p: float = 2.0
    T: float = 0.99
    t: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.weights))
        if self.alpha <= 1:
            raise InvalidArgumentError("affinity alpha must be > 1")
        if self.p < 1:
            raise InvalidArgumentError("affinity p must be >= 1")
        if not 0 < self.T < 1:
            raise InvalidArgumentError("affinity T must lie in (0, 1)")
        if self.t is not None and self.t <= 0:
            raise InvalidArgumentError("affinity t must be > 0")


_STAGES = {
    "lift": LiftConfig,
    "cost": CostConfig,
    "dilation": DilationConfig,
    "components": ComponentsConfig,
    "affinity": AffinityConfig,
}


@dataclass(frozen=True)
class RunConfig:
    lift: LiftConfig = field(default_factory=LiftConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    dilation: DilationConfig = field(default_factory=DilationConfig)
    components: ComponentsConfig = field(default_factory=ComponentsConfig)
    affinity: AffinityConfig = field(default_factory=AffinityConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(_STAGES)
        if unknown:
            raise InvalidArgumentError(f"unknown config tables: {sorted(unknown)}")
        kwargs = {}
        for name, klass in _STAGES.items():
            table = dict(data.get(name, {}))
            allowed = {f.name for f in fields(klass)}
            bad = set(table) - allowed
            if bad:
                raise InvalidArgumentError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                kwargs[name] = klass(**table)
            except TypeError as exc:
                raise InvalidArgumentError(f"bad value in [{name}]: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config {p}: {exc}") from exc
        try:
            if p.suffix.lower() == ".json":
                data = json.loads(raw.decode("utf-8"))
            else:
                data = tomllib.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise InvalidArgumentError(f"cannot parse config {p}: {exc}") from exc
        return cls.from_dict(data)

    def with_stage(self, name: str, **changes) -> "RunConfig":
        return replace(self, **{name: replace(getattr(self, name), **changes)})

    def to_dict(self) -> dict:
        out = {}
        for name in _STAGES:
            d = asdict(getattr(self, name))
            for k, v in list(d.items()):
                if isinstance(getattr(getattr(self, name), k), MetricWeights):
                    w = getattr(getattr(self, name), k)
                    d[k] = [w.w1, w.w2, w.w3]
            out[name] = d
        return out
