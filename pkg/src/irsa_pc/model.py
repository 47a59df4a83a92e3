"""Core domain types: degree distributions, power models and system configuration."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-9
RENORM_TOL = 1e-6


class ConfigError(ValueError):
    """Raised for invalid model parameters or configuration input."""


def _normalize(values: Sequence[float], what: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ConfigError(f"{what}: empty probability vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1 + PROB_TOL):
        raise ConfigError(f"{what}: probabilities must lie in [0, 1], got {list(arr)}")
    total = float(arr.sum())
    err = abs(total - 1.0)
    if err > RENORM_TOL:
        raise ConfigError(f"{what}: probabilities sum to {total:.9g}, expected 1")
    if err > PROB_TOL:
        warnings.warn(f"{what}: probabilities sum to {total:.9g}; renormalized", stacklevel=3)
    return tuple(float(v) for v in arr / total)


@dataclass(frozen=True)
class RepetitionDistribution:
    """Node-perspective user degree distribution, stored sparsely as {l: Lambda_l}."""

    coefficients: Mapping[int, float]

    def __post_init__(self):
        if not self.coefficients:
            raise ConfigError("repetition: empty distribution")
        items = sorted((int(l), float(v)) for l, v in self.coefficients.items())
        for l, _ in items:
            if l < 1:
                raise ConfigError(f"repetition: degree {l} must be >= 1")
        probs = _normalize([v for _, v in items], "repetition")
        object.__setattr__(self, "coefficients",
                           {l: p for (l, _), p in zip(items, probs) if p > 0})

    @property
    def degrees(self) -> np.ndarray:
        return np.array(list(self.coefficients), dtype=int)

    @property
    def probs(self) -> np.ndarray:
        return np.array(list(self.coefficients.values()), dtype=float)

    @property
    def max_degree(self) -> int:
        return max(self.coefficients)

    @property
    def rate(self) -> float:
        """Mean repetition rate R = Lambda'(1)."""
        return float(sum(l * v for l, v in self.coefficients.items()))

    def __call__(self, x):
        return eval_poly(self, x)

    def describe(self) -> str:
        return "+".join(f"{v:g}x^{l}" for l, v in self.coefficients.items())


@dataclass(frozen=True)
class EdgePerspectiveDistribution:
    """Edge-perspective distribution {l: lambda_l}, lambda(x) = sum lambda_l x^(l-1)."""

    coefficients: Mapping[int, float]

    def __post_init__(self):
        items = sorted((int(l), float(v)) for l, v in self.coefficients.items())
        if not items or items[0][0] < 1:
            raise ConfigError("edge distribution: degrees must be >= 1")
        probs = _normalize([v for _, v in items], "edge distribution")
        object.__setattr__(self, "coefficients",
                           {l: p for (l, _), p in zip(items, probs) if p > 0})

    @property
    def degrees(self) -> np.ndarray:
        return np.array(list(self.coefficients), dtype=int)

    @property
    def probs(self) -> np.ndarray:
        return np.array(list(self.coefficients.values()), dtype=float)

    def __call__(self, x):
        return eval_poly(self, x)

    def to_node(self) -> RepetitionDistribution:
        """Invert lambda_l = l Lambda_l / R."""
        w = {l: v / l for l, v in self.coefficients.items()}
        s = sum(w.values())
        return RepetitionDistribution({l: v / s for l, v in w.items()})


def edge_perspective(rep: RepetitionDistribution) -> EdgePerspectiveDistribution:
    R = rep.rate
    return EdgePerspectiveDistribution({l: l * v / R for l, v in rep.coefficients.items()})


def eval_poly(dist, x):
    """Lambda(x) = sum Lambda_l x^l for node view, lambda(x) = sum lambda_l x^(l-1) for edge view."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise ValueError(f"eval_poly: x must lie in [0, 1], got {x}")
    shift = 1 if isinstance(dist, EdgePerspectiveDistribution) else 0
    out = np.zeros_like(xa)
    for l, v in dist.coefficients.items():
        out = out + v * xa ** (l - shift)
    return float(out) if out.ndim == 0 else out


def slot_occupancy_pmf(g: float, k: int) -> float:
    """Poisson(g) probability that a slot carries k packets (large-frame limit)."""
    if g < 0 or k < 0:
        raise ValueError("slot_occupancy_pmf: need g >= 0 and k >= 0")
    if g == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(g) - g - math.lgamma(k + 1))


@dataclass(frozen=True)
class PowerModel:
    """Discrete transmit power levels P_1 > ... > P_n chosen with probabilities delta.

    Levels are stored as ratios to the smallest level.
    """

    levels: tuple[float, ...]
    choice: tuple[float, ...]
    capture_threshold: float = 2.0
    gap_factor: int = 5

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size == 0:
            raise ConfigError("power_levels: need at least one level")
        if np.any(~np.isfinite(lv)) or np.any(lv <= 0):
            raise ConfigError("power_levels: levels must be positive")
        if np.any(np.diff(lv) >= 0):
            raise ConfigError("power_levels: levels must be strictly decreasing")
        if len(self.choice) != lv.size:
            raise ConfigError("power_probs: length must match power_levels")
        if not self.capture_threshold > 1:
            raise ConfigError(f"beta must be > 1, got {self.capture_threshold}")
        if int(self.gap_factor) < 1:
            raise ConfigError(f"k must be >= 1, got {self.gap_factor}")
        object.__setattr__(self, "levels", tuple(float(v) for v in lv / lv[-1]))
        object.__setattr__(self, "choice", _normalize(self.choice, "power_probs"))
        object.__setattr__(self, "capture_threshold", float(self.capture_threshold))
        object.__setattr__(self, "gap_factor", int(self.gap_factor))

    @classmethod
    def geometric(cls, delta: Sequence[float], beta: float = 2.0, k: int = 5) -> "PowerModel":
        """Levels spaced exactly by k*beta, e.g. {10, 1} for beta=2, k=5."""
        n = len(delta)
        levels = tuple(float((k * beta) ** (n - 1 - i)) for i in range(n))
        return cls(levels, tuple(delta), beta, k)

    @classmethod
    def dpc(cls, delta: float, beta: float = 2.0, k: int = 5) -> "PowerModel":
        """Two-level model; delta is the probability of the high level."""
        if delta >= 1.0:
            return cls((1.0,), (1.0,), beta, k)
        if delta <= 0.0:
            return cls((1.0,), (1.0,), beta, k)
        return cls.geometric((delta, 1.0 - delta), beta, k)

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def beta(self) -> float:
        return self.capture_threshold

    @property
    def delta(self) -> np.ndarray:
        return np.asarray(self.choice)

    @property
    def gap_satisfied(self) -> bool:
        kb = self.gap_factor * self.capture_threshold
        return all(a >= kb * b * (1 - 1e-12) for a, b in zip(self.levels, self.levels[1:]))

    def scaled(self, c: float) -> "PowerModel":
        """Same model with every level multiplied by c (ratios are unchanged)."""
        obj = object.__new__(PowerModel)
        object.__setattr__(obj, "levels", tuple(c * v for v in self.levels))
        object.__setattr__(obj, "choice", self.choice)
        object.__setattr__(obj, "capture_threshold", self.capture_threshold)
        object.__setattr__(obj, "gap_factor", self.gap_factor)
        return obj


@dataclass(frozen=True)
class SystemConfig:
    slots: int
    power: PowerModel
    repetition: RepetitionDistribution
    load: float = 1.0
    power_per_user: bool = False

    def __post_init__(self):
        if int(self.slots) < 1:
            raise ConfigError(f"slots must be >= 1, got {self.slots}")
        if not (self.load >= 0 and math.isfinite(self.load)):
            raise ConfigError(f"load must be >= 0, got {self.load}")
        object.__setattr__(self, "slots", int(self.slots))
        object.__setattr__(self, "load", float(self.load))

    @property
    def num_users(self) -> int:
        return int(round(self.load * self.slots))

    def with_load(self, g: float) -> "SystemConfig":
        return SystemConfig(self.slots, self.power, self.repetition, g, self.power_per_user)

    def with_power(self, power: PowerModel) -> "SystemConfig":
        return SystemConfig(self.slots, power, self.repetition, self.load, self.power_per_user)

    def to_dict(self) -> dict:
        return {
            "slots": self.slots,
            "load": self.load,
            "beta": self.power.capture_threshold,
            "k": self.power.gap_factor,
            "power_levels": list(self.power.levels),
            "power_probs": list(self.power.choice),
            "repetition": {int(l): v for l, v in self.repetition.coefficients.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SystemConfig":
        keys = {"slots", "load", "beta", "k", "power_levels", "power_probs", "repetition"}
        unknown = set(d) - keys - {"power_per_user"}
        if unknown:
            raise ConfigError(f"system: unknown key(s) {sorted(unknown)}")
        missing = keys - set(d)
        if missing:
            raise ConfigError(f"system: missing key(s) {sorted(missing)}")
        rep = d["repetition"]
        if not isinstance(rep, Mapping):
            raise ConfigError("repetition: expected a mapping degree -> probability")
        try:
            rep = {int(l): float(v) for l, v in rep.items()}
            levels = [float(v) for v in d["power_levels"]]
            probs = [float(v) for v in d["power_probs"]]
            beta, k = float(d["beta"]), int(d["k"])
            slots, load = int(d["slots"]), float(d["load"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system: malformed value ({exc})") from None
        return cls(slots, PowerModel(tuple(levels), tuple(probs), beta, k),
                   RepetitionDistribution(rep), load, bool(d.get("power_per_user", False)))


LIVA = RepetitionDistribution({2: 0.5, 3: 0.28, 8: 0.22})
