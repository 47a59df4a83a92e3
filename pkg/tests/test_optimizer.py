import numpy as np
import pytest

from irsa_pc.density_evolution import capacity, run_de, DEParameters
from irsa_pc.model import LIVA, PowerModel, RepetitionDistribution, edge_perspective
from irsa_pc.optimizer import (OptimizationProblem, OptimizerSettings, default_q_grid, feasible,
                               optimize)

LAM = tuple(edge_perspective(LIVA).probs)


def test_q_grid():
    q = default_q_grid()
    assert q[0] > 0 and q[-1] == 1.0 and np.all(np.diff(q) > 0)
    assert len(q) == 1050


def test_feasible_examples():
    P = OptimizationProblem()
    assert feasible((0.1, LAM, (0.4, 0.6)), P)
    assert run_de(DEParameters(0.1, LIVA, PowerModel.dpc(0.4)))[0] < 1e-9
    assert not feasible((5.0, LAM, (0.4, 0.6)), P)
    assert not feasible((0.1, (0.3, 0.3, 0.2), (0.4, 0.6)), P)


def test_settings_validation():
    with pytest.raises(ValueError):
        OptimizerSettings(population=4)
    with pytest.raises(ValueError):
        OptimizerSettings(mutation_factor=2.5)
    with pytest.raises(ValueError):
        OptimizationProblem(q_grid=np.array([0.5, 0.2]))


def test_determinism_and_history():
    P = OptimizationProblem(fixed_lambda=LAM)
    s = OptimizerSettings(population=12, generations=15, seed=4)
    a, b = optimize(P, s), optimize(P, s)
    assert a.best_g == b.best_g and np.array_equal(a.best_delta, b.best_delta)
    assert all(y >= x for x, y in zip(a.history, a.history[1:]))


def test_fixed_lambda_matches_capacity_sweep():
    P = OptimizationProblem(fixed_lambda=LAM)
    res = optimize(P, OptimizerSettings(population=20, generations=60, seed=1))
    assert res.feasible
    assert res.lambda_node == pytest.approx(LIVA.coefficients)
    oracle = max(capacity(PowerModel.dpc(d), LIVA, max_iter=20000)
                 for d in np.linspace(0.3, 0.45, 16))
    assert res.best_g == pytest.approx(oracle, abs=0.01)


def test_vanilla_regime():
    P = OptimizationProblem(n_levels=1)
    res = optimize(P, OptimizerSettings(population=20, generations=80, seed=2))
    assert res.feasible and res.best_g >= 0.90
    node = RepetitionDistribution(res.lambda_node)
    assert abs(capacity(PowerModel((1.0,), (1.0,)), node, max_iter=20000) - res.best_g) < 0.01
    js = res.to_json()
    assert set(js) == {"best_g", "lambda_node", "lambda_edge", "delta", "feasible"}
