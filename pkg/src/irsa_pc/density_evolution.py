"""Density evolution for IRSA with random power levels in the large-frame limit."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb, gammaln

from .model import (EdgePerspectiveDistribution, PowerModel, RepetitionDistribution,
                    edge_perspective, eval_poly)

LOSSLESS_P = 1e-6
TAIL_MASS = 1e-12


@dataclass(frozen=True)
class DEParameters:
    """Load, repetition distribution and power model.

    ``exact_k`` zeroes capture coefficients that need more than k lower-power
    interferers; by default lower tiers are treated as negligible at any count.
    """

    g: float
    repetition: RepetitionDistribution
    power: PowerModel
    exact_k: bool = False

    @property
    def R(self) -> float:
        return self.repetition.rate

    @property
    def edge_dist(self) -> EdgePerspectiveDistribution:
        return edge_perspective(self.repetition)


@dataclass(frozen=True)
class DEState:
    p: float
    q: float
    iteration: int


@dataclass(frozen=True)
class CaptureCoefficients:
    """w[l, t]: probability that an edge in a degree-l slot with t unresolved co-edges resolves."""

    table: np.ndarray
    max_degree: int

    def __getitem__(self, idx):
        return self.table[idx]


def slot_truncation(g: float, R: float) -> int:
    """Largest slot degree kept so that the Poisson(gR) tail beyond it is < 1e-12."""
    a = g * R
    return int(math.ceil(a + 12 * math.sqrt(a) + 30))


def rho_coefficients(g: float, R: float, L: int) -> np.ndarray:
    """rho_l for l = 1..L, the edge-perspective slot degree distribution."""
    a = g * R
    m = np.arange(L)
    if a == 0:
        out = np.zeros(L)
        out[0] = 1.0
        return out
    return np.exp(m * math.log(a) - a - gammaln(m + 1))


def f_p_2level(q, g: float, R: float, delta: float):
    x = g * np.asarray(q, dtype=float) * R
    out = 1 - (1 - delta) * np.exp(-x) - delta * np.exp(-x * delta) \
        - delta * (1 - delta) * x * np.exp(-x)
    return float(out) if np.ndim(out) == 0 else out


def f_q(p, edge_dist: EdgePerspectiveDistribution):
    return eval_poly(edge_dist, np.clip(p, 0.0, 1.0))


def _elementary_symmetric(values: Sequence[float]) -> np.ndarray:
    e = np.zeros(len(values) + 1)
    e[0] = 1.0
    for x in values:
        e[1:] = e[1:] + x * e[:-1]
    return e


def capture_coefficients(power: PowerModel, max_degree: int,
                         exact_k: bool = False) -> CaptureCoefficients:
    """Fill w[l, t] for l <= max_degree, t <= l - 1.

    An edge of level i is captured when every co-edge of a higher level has a
    distinct level (j of them, in j! orders) and the remaining t - j are of
    lower levels.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    d = np.asarray(power.delta, dtype=float)
    n = len(d)
    L = int(max_degree)
    w_t = np.zeros(L)
    for t in range(L):
        s = 0.0
        for i in range(n):
            higher = _elementary_symmetric(d[:i])
            lower = float(d[i + 1:].sum())
            acc = 0.0
            for j in range(min(t, i) + 1):
                m = t - j
                if exact_k and m > power.gap_factor:
                    continue
                acc += comb(t, j, exact=True) * math.factorial(j) * higher[j] * (lower ** m if m else 1.0)
            s += d[i] * acc
        w_t[t] = s
    w_t[0] = 1.0
    table = np.zeros((L + 1, L))
    for l in range(1, L + 1):
        table[l, :l] = w_t[:l]
    return CaptureCoefficients(table, L)


@lru_cache(maxsize=64)
def _binom_matrix(L: int) -> np.ndarray:
    l = np.arange(1, L + 1)[:, None]
    t = np.arange(L)[None, :]
    return np.where(t <= l - 1, comb(l - 1, t), 0.0)


def _capture_mass(q: float, w: CaptureCoefficients, L: int) -> np.ndarray:
    """For each slot degree l = 1..L, the probability an edge there resolves."""
    l = np.arange(1, L + 1)[:, None]
    t = np.arange(L)[None, :]
    e = np.clip(l - 1 - t, 0, None)
    with np.errstate(invalid="ignore"):
        terms = _binom_matrix(L) * q ** t * (1 - q) ** e
    terms = np.where(t <= l - 1, terms, 0.0)
    return (terms * w.table[1:L + 1, :L]).sum(axis=1)


def f_p_general(q: float, params: DEParameters, w: Optional[CaptureCoefficients] = None) -> float:
    R = params.R
    L = slot_truncation(params.g, R)
    if w is None or w.max_degree < L:
        w = capture_coefficients(params.power, L, params.exact_k)
    rho = rho_coefficients(params.g, R, L)
    return float(np.sum(rho * (1 - _capture_mass(float(q), w, L))))


def f_p_3level_reference(q: float, g: float, R: float, deltas: Sequence[float]) -> float:
    """Three-level slot update written term by term (independent of the w-table code)."""
    d1, d2, d3 = deltas
    L = slot_truncation(g, R)
    a = g * R
    rho = [0.0] + [math.exp((l - 1) * math.log(a) - a - math.lgamma(l)) if a > 0 else float(l == 1)
                   for l in range(1, L + 1)]
    p = 1 - rho[1]
    p -= rho[2] * ((1 - q) + sum(d * (1 - d) for d in deltas) * q)
    for l in range(3, L + 1):
        s = (1 - q) ** (l - 1)
        for t in range(1, l):
            coef = d1 * (1 - d1) ** t + d2 * (d3 ** t + t * d1 * d3 ** (t - 1))
            s += coef * math.comb(l - 1, t) * q ** t * (1 - q) ** (l - t - 1)
        s += d3 * (1 - d3) * (l - 1) * (1 - q) ** (l - 2) * q
        s += 2 * d1 * d2 * d3 * math.comb(l - 1, 2) * (1 - q) ** (l - 3) * q ** 2
        p -= rho[l] * s
    return p


def _slot_update(params: DEParameters):
    """Vectorizable q -> p map for the given parameters."""
    pm = params.power
    if pm.n == 1:
        a = params.g * params.R
        return lambda q: 1 - np.exp(-a * np.asarray(q, float))
    if pm.n == 2 and not params.exact_k:
        delta = float(pm.delta[0])
        return lambda q: f_p_2level(q, params.g, params.R, delta)
    L = slot_truncation(params.g, params.R)
    w = capture_coefficients(pm, L, params.exact_k)
    return _thinned_update(params.g * params.R, w.table[L, :L])


def _thinned_update(a: float, w_t: np.ndarray):
    """Slot update for w depending on t only: mixing Binomial(l-1, q) over Poisson slot
    degrees gives Poisson(a q) unresolved co-edges."""
    t = np.arange(len(w_t))
    lg = gammaln(t + 1)

    def fp(q):
        qa = np.atleast_1d(np.asarray(q, float)) * a
        with np.errstate(divide="ignore", invalid="ignore"):
            logpmf = t[None, :] * np.log(qa[:, None]) - qa[:, None] - lg[None, :]
        pmf = np.where(qa[:, None] > 0, np.exp(logpmf), (t[None, :] == 0).astype(float))
        out = 1 - pmf @ w_t
        return out[0] if np.ndim(q) == 0 else out
    return fp


def slot_update(params: DEParameters):
    return _slot_update(params)


def run_de(params: DEParameters, max_iter: int = 500, eps: float = 1e-10,
           keep_trace: bool = True) -> tuple[float, bool, list[DEState]]:
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    fp = _slot_update(params)
    lam = params.edge_dist
    q = 1.0
    p = float(fp(q))
    trace = [DEState(p, q, 1)] if keep_trace else []
    converged = False
    for i in range(2, max_iter + 1):
        q = float(f_q(p, lam))
        p_new = float(fp(q))
        if keep_trace:
            trace.append(DEState(p_new, q, i))
        if abs(p_new - p) < eps:
            p = p_new
            converged = True
            break
        p = p_new
    return p, converged, trace


def asymptotic_throughput(params: DEParameters, max_iter: int = 500,
                          eps: float = 1e-10) -> tuple[float, float]:
    if params.g == 0:
        return 0.0, 0.0
    p_inf, _, _ = run_de(params, max_iter, eps, keep_trace=False)
    loss = float(params.repetition(min(max(p_inf, 0.0), 1.0)))
    return params.g * (1 - loss), loss


def is_lossless(power: PowerModel, rep: RepetitionDistribution, g: float,
                exact_k: bool = False, max_iter: int = 500) -> bool:
    p_inf, _, _ = run_de(DEParameters(g, rep, power, exact_k), max_iter, keep_trace=False)
    return p_inf < LOSSLESS_P


def capacity(power: PowerModel, rep: RepetitionDistribution, g_max: float = 4.0,
             exact_k: bool = False, tol: float = 1e-4, max_iter: int = 500) -> float:
    """Largest lossless load found by bisection; the throughput there equals the load."""
    lo = 1e-3
    if not is_lossless(power, rep, lo, exact_k, max_iter):
        return 0.0
    hi = float(g_max)
    if is_lossless(power, rep, hi, exact_k, max_iter):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_lossless(power, rep, mid, exact_k, max_iter):
            lo = mid
        else:
            hi = mid
    return lo


def de_sweep(power: PowerModel, rep: RepetitionDistribution, loads: Sequence[float],
             exact_k: bool = False) -> list[tuple[float, float, float]]:
    """(g, T, P_L) at each load."""
    out = []
    for g in loads:
        T, PL = asymptotic_throughput(DEParameters(float(g), rep, power, exact_k))
        out.append((float(g), T, PL))
    return out


def trace_csv(trace: Sequence[DEState]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "p", "q"])
    for s in trace:
        w.writerow([s.iteration, repr(s.p), repr(s.q)])
    return buf.getvalue()
