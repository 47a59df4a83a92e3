"""Upper bounds on the asymptotic throughput of two-level IRSA-PC."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .density_evolution import capacity, f_p_2level
from .model import (EdgePerspectiveDistribution, PowerModel, RepetitionDistribution,
                    edge_perspective)

BOUNDS_HEADER = ["lambda_desc", "delta", "R", "Lambda2", "T_star", "UB1", "UB2", "UB3", "RI"]
QUAD_TOL = 1e-8


class DegenerateTangentError(ValueError):
    pass


@dataclass(frozen=True)
class BoundReport:
    ub1: float
    ub2: float
    ub3: float
    rate_independent: float
    A_p: float
    A_q: float
    A_min: float
    T_star: float = float("nan")
    R: float = float("nan")
    lambda2: float = 0.0
    delta: float = float("nan")
    label: str = ""

    def csv_row(self) -> list:
        return [self.label, self.delta, self.R, self.lambda2, self.T_star,
                self.ub1, self.ub2, self.ub3, self.rate_independent]


def area_condition(T: float, R: float, delta: float) -> float:
    """A_p + A_q - 1 at load g = T, written in closed form; feasible when <= 0."""
    x = R * T
    return ((delta ** 2 - 2) / x + math.exp(-x) * ((1 - delta ** 2) / x + delta * (1 - delta))
            + math.exp(-x * delta) / x + 1 / R)


def _largest_feasible(cond, lo: float, hi: float, samples: int, tol: float) -> float:
    xs = np.linspace(lo, hi, samples)
    vals = np.array([cond(x) for x in xs])
    bad = np.flatnonzero(vals > 0)
    if bad.size == 0:
        return math.inf
    first = bad[0]
    if first == 0:
        return 0.0
    a, b = xs[first - 1], xs[first]
    while b - a > tol:
        m = 0.5 * (a + b)
        if cond(m) <= 0:
            a = m
        else:
            b = m
    return float(a)


def ub1(R: float, delta: float) -> float:
    """Largest T for which the EXIT areas of the two curves fit in the unit square."""
    if R < 1 or not 0 <= delta <= 1:
        raise ValueError("need R >= 1 and delta in [0, 1]")
    return _largest_feasible(lambda T: area_condition(T, R, delta), 1e-4, 4.0, 400, 1e-6)


def rate_independent_ub(delta: float) -> float:
    return 2 - delta ** 2


def ub3(delta: float, lambda2_node: float) -> float:
    ri = rate_independent_ub(delta)
    if lambda2_node <= 0:
        return ri
    return min(ri, 1 / (2 * (1 + 2 * delta ** 2 - 2 * delta) * lambda2_node))


def _slope(fp, q: float, h: float = 1e-6) -> float:
    a, b = max(q - h, 0.0), min(q + h, 1.0)
    return (fp(b) - fp(a)) / (b - a)


def tangent_point(fp) -> tuple[float, float]:
    """Contact point (p_c, q_c) of the line through (1, 1) tangent to the curve (fp(q), q)."""
    h = lambda q: (1 - fp(q)) - _slope(fp, q) * (1 - q)
    qs = np.linspace(1e-6, 1 - 1e-6, 401)
    hv = np.array([h(q) for q in qs])
    if np.all(np.abs(hv) < 1e-12):
        raise DegenerateTangentError("curve is a straight line through (1, 1)")
    sign = np.flatnonzero(np.diff(np.sign(hv)) != 0)
    if sign.size == 0:
        raise DegenerateTangentError("no tangent from (1, 1)")
    i = sign[-1]
    qc = brentq(h, qs[i], qs[i + 1], xtol=1e-14)
    return fp(qc), qc


def exit_areas(T: float, R: float, delta: float) -> tuple[float, float, float]:
    """(A_p, A_q, A_min) for the two-level curves at g = T.

    A_min is the area between the tangent line and the curve over the extent
    of the curve, p in [p_c, fp(1)].
    """
    fp = lambda q: f_p_2level(q, T, R, delta)
    A_p = quad(fp, 0.0, 1.0, epsabs=QUAD_TOL)[0]
    A_q = 1.0 / R
    pc, qc = tangent_point(fp)
    p_end = fp(1.0)
    # strip q in [q_c, 1] between line and curve, minus the corner beyond the curve's end
    strip = 0.5 * (1 - qc) * (1 + pc) - quad(fp, qc, 1.0, epsabs=QUAD_TOL)[0]
    q_line_end = qc + (1 - qc) / (1 - pc) * (p_end - pc)
    corner = 0.5 * (1 - p_end) * (1 - q_line_end)
    return A_p, A_q, max(strip - corner, 0.0)


def ub2(edge_dist: Optional[EdgePerspectiveDistribution], R: float,
        delta: float) -> tuple[float, float]:
    """Refined area bound including the region cut off by the tangent through (1, 1).

    Only R enters through A_q = 1/R; ``edge_dist`` is accepted for symmetry.
    """
    def cond(T):
        try:
            A_p, A_q, A_min = exit_areas(T, R, delta)
        except DegenerateTangentError:
            return area_condition(T, R, delta)
        return A_p + A_q + A_min - 1

    upper = ub1(R, delta)
    hi = min(upper if math.isfinite(upper) else 4.0, 4.0) + 1e-3
    lo = 1e-3
    if cond(lo) > 0:
        return 0.0, 0.0
    if cond(hi) <= 0:
        return hi, exit_areas(hi, R, delta)[2]
    while hi - lo > 1e-5:
        m = 0.5 * (lo + hi)
        if cond(m) <= 0:
            lo = m
        else:
            hi = m
    return lo, exit_areas(lo, R, delta)[2]


def bound_report(rep: RepetitionDistribution, delta: float, label: str = "",
                 T_star: Optional[float] = None) -> BoundReport:
    R = rep.rate
    lam2 = rep.coefficients.get(2, 0.0)
    b1 = ub1(R, delta)
    b2, _ = ub2(edge_perspective(rep), R, delta)
    A_p, A_q, A_min = exit_areas(b2, R, delta)
    if T_star is None:
        T_star = capacity(PowerModel.dpc(delta), rep)
    return BoundReport(b1, b2, ub3(delta, lam2), rate_independent_ub(delta), A_p, A_q, A_min,
                       T_star, R, lam2, delta, label or rep.describe())


def bounds_csv(reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDS_HEADER)
    for r in reports:
        w.writerow([r.label] + [repr(float(v)) for v in r.csv_row()[1:]])
    return buf.getvalue()
