"""Closed-form throughput of slotted ALOHA with random power levels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .model import _normalize


@dataclass(frozen=True)
class SAResult:
    throughput: float
    components: tuple[float, ...]
    valid: bool = True


def sa_throughput(g: float) -> float:
    if g < 0:
        raise ValueError("g must be >= 0")
    return g * math.exp(-g)


def sa_dpc_throughput(g: float, delta: float, gap_satisfied: bool = True) -> SAResult:
    """Two power levels; the high level is chosen with probability delta.

    Components are (high-power decodes, low-power decodes) per slot.
    """
    if g < 0 or not 0 <= delta <= 1:
        raise ValueError("need g >= 0 and delta in [0, 1]")
    gd = g * delta
    high = gd * math.exp(-gd)
    low = (1 + gd) * g * (1 - delta) * math.exp(-g)
    return SAResult(high + low, (high, low), gap_satisfied)


def sa_npc_throughput(g: float, deltas: Sequence[float], gap_satisfied: bool = True) -> SAResult:
    """n power levels: level i decodes when at most one packet of each higher level shares the slot."""
    if g < 0:
        raise ValueError("g must be >= 0")
    d = _normalize(deltas, "deltas")
    comps = []
    lead = 1.0
    for di in d:
        x = g * di
        comps.append(lead * x * math.exp(-x))
        lead *= (1 + x) * math.exp(-x)
    return SAResult(math.fsum(comps), tuple(comps), gap_satisfied)


def sa_dpc_gain(g: float, delta: float) -> float:
    """T_SA-DPC - T_SA, expanded; both terms are nonnegative."""
    return g * delta * (math.exp(-g * delta) - math.exp(-g)) \
        + g * g * delta * (1 - delta) * math.exp(-g)


def sa_dpc_gain_lower(g: float, delta: float) -> float:
    """Capture-only part of the gain, g^2 delta (1 - delta) e^-g; strictly below the full gain."""
    return g * g * delta * (1 - delta) * math.exp(-g)


def sa_dpc_optimum(delta: Optional[float] = None, g_max: float = 10.0) -> tuple[float, float, float]:
    """Maximize the two-level SA throughput over (g, delta); optionally with delta fixed."""
    def neg(x):
        g, d = x
        return -sa_dpc_throughput(g, d).throughput

    gs = np.linspace(0.0, g_max, 200)
    ds = np.linspace(0.0, 1.0, 100) if delta is None else np.array([float(delta)])
    G, D = np.meshgrid(gs, ds, indexing="ij")
    GD = G * D
    T = GD * np.exp(-GD) + (1 + GD) * G * (1 - D) * np.exp(-G)
    i, j = np.unravel_index(np.argmax(T), T.shape)
    x0 = np.array([gs[i], ds[j]])
    bounds = [(0.0, g_max), (0.0, 1.0) if delta is None else (ds[0], ds[0])]
    res = minimize(neg, x0, method="L-BFGS-B", bounds=bounds)
    best = res.x if -res.fun >= T[i, j] else x0
    g, d = float(best[0]), float(best[1])
    return g, d, sa_dpc_throughput(g, d).throughput
