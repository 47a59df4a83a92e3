import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsa_pc.density_evolution import (DEParameters, _capture_mass, asymptotic_throughput,
                                       capacity, capture_coefficients, f_p_2level, f_p_3level_reference,
                                       f_p_general, f_q, run_de, slot_update,
                                       trace_csv)
from irsa_pc.model import LIVA, PowerModel, RepetitionDistribution, SystemConfig, edge_perspective
from irsa_pc.simulator import monte_carlo

DPC = PowerModel.dpc(0.4)
THREE = PowerModel.geometric((0.27, 0.39, 0.34))
SINGLE = PowerModel((1.0,), (1.0,))
QS = [0.1 * i for i in range(1, 10)]


def test_f_p_2level_limits():
    assert f_p_2level(0.0, 1.3, 3.6, 0.4) == pytest.approx(0.0, abs=1e-15)
    for d in (0.0, 1.0):
        assert f_p_2level(0.6, 1.3, 3.6, d) == pytest.approx(1 - math.exp(-1.3 * 0.6 * 3.6))


def test_f_q_examples():
    lam = edge_perspective(LIVA)
    assert f_q(1.0, lam) == pytest.approx(1.0)
    assert f_q(0.0, lam) == 0.0
    assert f_q(0.5, edge_perspective(RepetitionDistribution({2: 1.0}))) == pytest.approx(0.5)


def test_capture_coefficients_two_level():
    w = capture_coefficients(DPC, 10)
    d = 0.4
    for l in range(1, 11):
        assert w[l][0] == 1.0
        for t in range(1, l):
            expected = 2 * d * (1 - d) if t == 1 else d * (1 - d) ** t
            assert w[l][t] == expected or w[l][t] == pytest.approx(expected, rel=1e-15)
    assert w[6][1] == pytest.approx(0.48)
    assert w[6][3] == pytest.approx(0.0864)


def test_capture_coefficients_single_and_three():
    w = capture_coefficients(SINGLE, 6)
    assert np.all(w.table[1:, 0] == 1) and np.all(w.table[:, 1:] == 0)
    d1, d2, d3 = 0.27, 0.39, 0.34
    w = capture_coefficients(THREE, 6)
    t2 = d1 * (1 - d1) ** 2 + d2 * (d3 ** 2 + 2 * d1 * d3) + 2 * d1 * d2 * d3
    assert w[5][2] == pytest.approx(t2, abs=1e-15)
    assert w[5][1] == pytest.approx(sum(x * (1 - x) for x in (d1, d2, d3)), abs=1e-15)
    with pytest.raises(ValueError):
        capture_coefficients(THREE, 0)


def test_exact_k_caps_lower_interferers():
    pm = PowerModel.dpc(0.4, k=3)
    w = capture_coefficients(pm, 8, exact_k=True)
    assert w[8][3] == pytest.approx(0.4 * 0.6 ** 3)
    assert np.all(w.table[8, 4:] == 0)


@pytest.mark.parametrize("power", [SINGLE, DPC, THREE, PowerModel.geometric((0.2, 0.3, 0.1, 0.4))])
def test_capture_mass_in_unit_interval(power):
    w = capture_coefficients(power, 40)
    for q in np.linspace(0, 1, 11):
        m = _capture_mass(q, w, 40)
        assert np.all(m >= -1e-12) and np.all(m <= 1 + 1e-12)
    assert np.all((w.table >= 0) & (w.table <= 1))


@pytest.mark.parametrize("g", [0.5, 1.0, 1.7])
def test_general_matches_two_level(g):
    for q in QS:
        P = DEParameters(g, LIVA, DPC)
        assert f_p_general(q, P) == pytest.approx(f_p_2level(q, g, 3.6, 0.4), abs=1e-8)


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_general_matches_three_level_reference(g):
    for q in QS:
        P = DEParameters(g, LIVA, THREE)
        assert f_p_general(q, P) == pytest.approx(
            f_p_3level_reference(q, g, 3.6, (0.27, 0.39, 0.34)), abs=1e-8)


def test_reference_limits():
    assert f_p_3level_reference(0.0, 1.0, 3.6, (0.27, 0.39, 0.34)) == pytest.approx(0, abs=1e-12)
    assert f_p_3level_reference(0.4, 1.0, 3.6, (1.0, 0.0, 0.0)) == pytest.approx(
        1 - math.exp(-1.0 * 0.4 * 3.6), abs=1e-10)
    P = DEParameters(1.2, LIVA, SINGLE)
    assert f_p_general(0.0, P) == pytest.approx(0, abs=1e-12)
    assert f_p_general(0.3, P) == pytest.approx(1 - math.exp(-1.2 * 0.3 * 3.6), abs=1e-10)


@pytest.mark.parametrize("power", [THREE, PowerModel.geometric((0.1, 0.2, 0.3, 0.4))])
def test_fast_update_matches_general(power):
    P = DEParameters(1.4, LIVA, power)
    fp = slot_update(P)
    for q in QS:
        assert fp(q) == pytest.approx(f_p_general(q, P), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 1.0), st.integers(1, 3))
def test_monotone_maps_and_trace(g, d, n):
    power = PowerModel.dpc(d) if n <= 2 else PowerModel.geometric((d / 2, d / 2 + 1e-3, 1 - d - 1e-3)
                                                                   if d < 0.99 else (0.3, 0.3, 0.4))
    P = DEParameters(g, LIVA, power)
    qs = np.linspace(0, 1, 101)
    fp = np.array([slot_update(P)(q) for q in qs])
    assert np.all(np.diff(fp) >= -1e-12)
    assert np.all(np.diff(f_q(qs, P.edge_dist)) >= -1e-12)
    p_inf, conv, trace = run_de(P)
    ps = np.array([s.p for s in trace])
    assert trace[0].q == 1.0 and trace[0].iteration == 1
    assert np.all(np.diff(ps) <= 1e-12)
    assert np.all((ps >= -1e-12) & (ps <= 1 + 1e-12))
    if conv:
        assert abs(p_inf - slot_update(P)(f_q(p_inf, P.edge_dist))) < 1e-9


def test_run_de_regions():
    assert run_de(DEParameters(0.1, LIVA, DPC))[0] < 1e-9
    assert run_de(DEParameters(5.0, LIVA, DPC))[0] > 0.5
    a = run_de(DEParameters(0.5, LIVA, PowerModel.dpc(1.0)))[2]
    P = DEParameters(0.5, LIVA, SINGLE)
    q, ref = 1.0, []
    for _ in range(len(a)):
        p = 1 - math.exp(-0.5 * q * 3.6)
        ref.append(p)
        q = f_q(p, P.edge_dist)
    assert [s.p for s in a] == pytest.approx(ref, abs=1e-15)


def test_asymptotic_throughput():
    T, PL = asymptotic_throughput(DEParameters(1.6, LIVA, DPC))
    assert T == pytest.approx(1.6, abs=1e-6) and PL < 1e-9
    assert asymptotic_throughput(DEParameters(0.0, LIVA, DPC)) == (0.0, 0.0)
    T, PL = asymptotic_throughput(DEParameters(0.9, LIVA, SINGLE))
    assert T == pytest.approx(0.9, abs=1e-6)


def test_capacity_phase_transition():
    c = capacity(DPC, LIVA)
    assert 1.6 < c < 1.75
    assert run_de(DEParameters(0.99 * c, LIVA, DPC))[0] < 1e-6
    assert run_de(DEParameters(1.01 * c, LIVA, DPC))[0] > 1e-3
    assert capacity(DPC, RepetitionDistribution({1: 1.0})) == 0.0


def test_trace_csv():
    _, _, trace = run_de(DEParameters(1.0, LIVA, DPC))
    lines = trace_csv(trace).strip().split("\n")
    assert lines[0] == "iteration,p,q"
    assert len(lines) == len(trace) + 1
    it, p, q = lines[1].split(",")
    assert int(it) == 1 and float(q) == 1.0 and float(p) == trace[0].p


@pytest.mark.slow
def test_de_matches_large_frame_monte_carlo():
    c = capacity(DPC, LIVA)
    g = 0.9 * c
    T, _ = asymptotic_throughput(DEParameters(g, LIVA, DPC))
    est = monte_carlo(SystemConfig(5000, DPC, LIVA, g), 20, seed=4, workers=4)
    assert abs(T - est.mean_throughput) < 0.02
