import math

import numpy as np
import pytest

from irsa_pc.bounds import (BOUNDS_HEADER, area_condition, bound_report, bounds_csv, exit_areas,
                            rate_independent_ub, ub1, ub3)
from irsa_pc.density_evolution import capacity
from irsa_pc.model import LIVA, PowerModel, RepetitionDistribution


def test_area_condition_matches_quadrature():
    for R, d, T in [(3.6, 0.4, 1.2), (3.4, 0.6, 1.5), (2.5, 0.9, 0.7)]:
        A_p, A_q, _ = exit_areas(T, R, d)
        assert area_condition(T, R, d) == pytest.approx(A_p + A_q - 1, abs=1e-8)


@pytest.mark.parametrize("R", [2.0, 3.6, 5.0])
def test_ub1_single_level_reduction(R):
    from scipy.optimize import brentq
    expected = brentq(lambda T: T + math.exp(-R * T) - 1, 1e-3, 1.0)
    assert ub1(R, 1.0) == pytest.approx(expected, abs=2e-6)
    assert ub1(R, 0.0) == pytest.approx(expected, abs=2e-6)


def test_ub1_value():
    assert ub1(3.6, 1.0) == pytest.approx(0.9695, abs=5e-4)


def test_rate_independent_and_ub3():
    assert rate_independent_ub(1) == 1
    assert rate_independent_ub(0.4) == pytest.approx(1.84)
    assert rate_independent_ub(0) == 2
    assert ub3(1.0, 0.5) == pytest.approx(1.0)
    assert ub3(0.4, 0.56) == pytest.approx(1 / (2 * 0.52 * 0.56))
    assert ub3(0.4, 0.5) == pytest.approx(1.84)
    assert ub3(0.4, 0.0) == pytest.approx(1.84)


def _random_cases(n=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        w = rng.dirichlet(np.ones(3))
        out.append((RepetitionDistribution({2: w[0], 3: w[1], 8: w[2]}), float(rng.uniform(0, 1))))
    return out


@pytest.mark.slow
@pytest.mark.parametrize("rep,delta", _random_cases())
def test_soundness_and_ordering(rep, delta):
    c = capacity(PowerModel.dpc(delta), rep)
    r = bound_report(rep, delta, T_star=c)
    assert c <= r.ub1 + 1e-3
    assert c <= r.ub2 + 1e-3
    assert c <= r.ub3 + 1e-3
    assert c <= r.rate_independent + 1e-12
    assert r.ub2 <= r.ub1 + 1e-6
    assert r.A_min >= 0
    assert r.rate_independent == 2 - delta ** 2


def test_bounds_csv():
    r = bound_report(LIVA, 0.4, label="liva", T_star=1.678)
    text = bounds_csv([r])
    head, row = text.strip().split("\n")
    assert head.split(",") == BOUNDS_HEADER
    fields = row.split(",")
    assert fields[0] == "liva" and float(fields[5]) == r.ub1
