import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from irsa_pc.model import (LIVA, ConfigError, PowerModel,
                           RepetitionDistribution, SystemConfig, edge_perspective, eval_poly,
                           slot_occupancy_pmf)


@st.composite
def repetitions(draw, max_deg=10):
    degs = draw(st.lists(st.integers(1, max_deg), min_size=1, max_size=5, unique=True))
    w = draw(st.lists(st.floats(0.01, 1.0), min_size=len(degs), max_size=len(degs)))
    s = sum(w)
    return RepetitionDistribution({l: v / s for l, v in zip(degs, w)})


def test_edge_perspective_liva():
    lam = edge_perspective(LIVA)
    assert LIVA.rate == pytest.approx(3.6, abs=1e-12)
    expected = {2: 1.0 / 3.6, 3: 0.84 / 3.6, 8: 1.76 / 3.6}
    for l, v in expected.items():
        assert lam.coefficients[l] == pytest.approx(v, abs=1e-12)


def test_edge_perspective_trivial():
    assert edge_perspective(RepetitionDistribution({1: 1.0})).coefficients == {1: 1.0}
    assert edge_perspective(RepetitionDistribution({2: 1.0})).coefficients == {2: 1.0}


def test_eval_poly_endpoints():
    lam = edge_perspective(LIVA)
    assert eval_poly(LIVA, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert eval_poly(LIVA, 0.0) == 0.0
    assert eval_poly(lam, 0.0) == 0.0
    with pytest.raises(ValueError):
        eval_poly(LIVA, 1.5)


def test_slot_occupancy_examples():
    assert slot_occupancy_pmf(1, 0) == pytest.approx(math.exp(-1))
    assert slot_occupancy_pmf(1, 5) == pytest.approx(1 / (120 * math.e))
    assert slot_occupancy_pmf(2, 2) == pytest.approx(2 * math.exp(-2))


@pytest.mark.parametrize("g", [0.0, 0.3, 1.0, 4.2, 10.0])
def test_slot_occupancy_normalized_and_decreasing(g):
    pmf = np.array([slot_occupancy_pmf(g, k) for k in range(201)])
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    tail = pmf[int(math.floor(g)) + 1:]
    tail = tail[tail > 1e-280]
    assert np.all(np.diff(tail) < 0)


@settings(max_examples=100, deadline=None)
@given(repetitions())
def test_normalization_both_views(rep):
    assert eval_poly(rep, 1.0) == pytest.approx(1.0, abs=1e-9)
    assert eval_poly(edge_perspective(rep), 1.0) == pytest.approx(1.0, abs=1e-9)
    assert rep.rate >= 1.0


@settings(max_examples=50, deadline=None)
@given(repetitions())
def test_round_trip_integration(rep):
    # Lambda(x) = int_0^x lambda / int_0^1 lambda
    lam = edge_perspective(rep)
    total = quad(lambda x: eval_poly(lam, x), 0, 1, epsabs=1e-13)[0]
    for x in (0.2, 0.5, 0.9):
        num = quad(lambda y: eval_poly(lam, y), 0, x, epsabs=1e-13)[0]
        assert num / total == pytest.approx(eval_poly(rep, x), abs=1e-9)
    back = lam.to_node()
    for l, v in rep.coefficients.items():
        assert back.coefficients[l] == pytest.approx(v, abs=1e-9)


def test_renormalize_policy():
    with pytest.warns(UserWarning):
        r = RepetitionDistribution({2: 0.5, 3: 0.4999995})
    assert sum(r.coefficients.values()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        RepetitionDistribution({2: 0.5, 3: 0.49})
    with pytest.raises(ConfigError):
        RepetitionDistribution({0: 1.0})


def test_power_model():
    pm = PowerModel((10.0, 1.0), (0.4, 0.6), 2.0, 5)
    assert pm.gap_satisfied
    assert not PowerModel((4.0, 1.0), (0.5, 0.5), 2.0, 5).gap_satisfied
    assert PowerModel.geometric((0.27, 0.39, 0.34)).levels == (100.0, 10.0, 1.0)
    assert PowerModel((50.0, 5.0), (0.5, 0.5)).levels == (10.0, 1.0)
    with pytest.raises(ConfigError):
        PowerModel((1.0, 10.0), (0.5, 0.5))
    with pytest.raises(ConfigError):
        PowerModel((10.0, 1.0), (0.5, 0.5), capture_threshold=0.5)


def test_system_config_roundtrip():
    cfg = SystemConfig(1000, PowerModel.dpc(0.4), LIVA, 1.25)
    assert cfg.num_users == 1250
    back = SystemConfig.from_dict(cfg.to_dict())
    assert back == cfg
    d = cfg.to_dict()
    d["typo"] = 1
    with pytest.raises(ConfigError, match="typo"):
        SystemConfig.from_dict(d)
    d = cfg.to_dict()
    del d["power_probs"]
    with pytest.raises(ConfigError, match="power_probs"):
        SystemConfig.from_dict(d)
