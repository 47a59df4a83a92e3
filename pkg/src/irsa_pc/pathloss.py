"""Path-loss channel and its discretization into an equivalent multi-level power model."""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy import stats

from .density_evolution import DEParameters, asymptotic_throughput, capacity
from .model import ConfigError, PowerModel, RepetitionDistribution, SystemConfig
from .simulator import Frame, _draw_degrees, _place_replicas

RADIAL_KINDS = ("uniform", "disk")


@dataclass(frozen=True)
class PathLossConfig:
    """Single transmit power P received as P (d/d_min)^-alpha beyond d_min.

    ``radial`` selects the user distance law: "uniform" draws the radius
    uniformly on [0, d_max]; "disk" places users uniformly on the disk.
    """

    d_min: float = 1.0
    alpha: float = 3.0
    P: float = 1.0
    P_min: float = 0.01
    radial: str = "uniform"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if not self.d_min > 0:
            raise ConfigError("d_min must be > 0")
        if not 0 < self.P_min <= self.P:
            raise ConfigError("need 0 < P_min <= P")
        if self.radial not in RADIAL_KINDS:
            raise ConfigError(f"radial must be one of {RADIAL_KINDS}")

    @property
    def d_max(self) -> float:
        return (self.P / self.P_min) ** (1 / self.alpha) * self.d_min

    def radial_distribution(self):
        if self.radial == "disk":
            return stats.powerlaw(2.0, scale=self.d_max)
        return stats.uniform(0.0, self.d_max)

    @classmethod
    def from_dict(cls, d) -> "PathLossConfig":
        keys = {"d_min", "alpha", "power", "p_min", "radial"}
        unknown = set(d) - keys
        if unknown:
            raise ConfigError(f"pathloss: unknown key(s) {sorted(unknown)}")
        try:
            return cls(float(d.get("d_min", 1.0)), float(d.get("alpha", 3.0)),
                       float(d.get("power", 1.0)), float(d.get("p_min", 0.01)),
                       str(d.get("radial", "uniform")))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"pathloss: {exc}") from None


@dataclass(frozen=True)
class DiscretizationResult:
    n: int
    power_levels: tuple[float, ...]
    delta: tuple[float, ...]
    distances: tuple[float, ...]
    midpoints: tuple[float, ...]

    def power_model(self, beta: float, k: int) -> PowerModel:
        return PowerModel(self.power_levels, self.delta, beta, k)


def received_power(p: PathLossConfig, d):
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(d <= p.d_min, p.P, p.P * (np.maximum(d, p.d_min) / p.d_min) ** -p.alpha)
    return float(out) if out.ndim == 0 else out


def discretize(p: PathLossConfig, k: int, beta: float) -> DiscretizationResult:
    """Map a path-loss population onto n levels spaced by k*beta.

    Users are binned to the nearest zone distance d_i; delta_i is the radial
    probability mass between consecutive zone midpoints.
    """
    kb = k * beta
    if not kb > 1:
        raise ValueError("need k*beta > 1")
    n = int(math.floor(math.log(p.P / p.P_min) / math.log(kb) + 1e-9)) + 1
    levels = [p.P / kb ** i for i in range(n)]
    if n > 1:
        levels[-1] = p.P_min
    d = [(p.P / P_i) ** (1 / p.alpha) * p.d_min for P_i in levels]
    ext = [-d[0]] + d + [d[-1]]
    mids = [0.5 * (ext[i] + ext[i + 1]) for i in range(n + 1)]
    cdf = p.radial_distribution().cdf
    mass = np.diff([float(cdf(m)) for m in mids])
    mass = np.clip(mass, 0, None)
    delta = tuple(float(v) for v in mass / mass.sum())
    return DiscretizationResult(n, tuple(levels), delta, tuple(d), tuple(mids))


def pathloss_frame(cfg: SystemConfig, p: PathLossConfig, rng: np.random.Generator) -> Frame:
    """One distance per user, shared by all of its replicas; cfg's power model is unused."""
    N = cfg.num_users
    degrees = _draw_degrees(cfg.repetition, N, rng)
    users, slots = _place_replicas(degrees, cfg.slots, rng)
    r = p.radial_distribution().rvs(size=N, random_state=rng) if N else np.zeros(0)
    power = np.atleast_1d(received_power(p, r)) / p.P_min
    return Frame(cfg.slots, users, slots, power[users], degrees)


def approximate_throughput(p: PathLossConfig, rep: RepetitionDistribution, k: int, beta: float,
                           g: float) -> float:
    disc = discretize(p, k, beta)
    T, _ = asymptotic_throughput(DEParameters(g, rep, disc.power_model(beta, k)))
    return T


def approximate_capacity(p: PathLossConfig, rep: RepetitionDistribution, k: int,
                         beta: float) -> float:
    return capacity(discretize(p, k, beta).power_model(beta, k), rep)
