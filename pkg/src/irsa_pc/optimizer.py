"""Maximize the lossless load over (lambda, delta, g) with differential evolution."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .density_evolution import f_p_2level, _thinned_update, capture_coefficients, slot_truncation
from .model import PowerModel

MARGIN = 1e-9
PENALTY = 1e3


def default_q_grid() -> np.ndarray:
    uniform = np.linspace(1e-3, 1.0, 1000)
    near_zero = np.logspace(-6, -3, 50, endpoint=False)
    return np.unique(np.concatenate([near_zero, uniform]))


@dataclass(frozen=True)
class OptimizationProblem:
    """Decision vector: [g, lambda_l for l in support, free deltas].

    ``fixed_delta`` / ``fixed_lambda`` remove those coordinates from the search.
    """

    support: tuple[int, ...] = (2, 3, 8)
    n_levels: int = 2
    beta: float = 2.0
    k: int = 5
    q_grid: np.ndarray = field(default_factory=default_q_grid)
    g_bounds: tuple[float, float] = (0.05, 3.0)
    fixed_delta: Optional[tuple[float, ...]] = None
    fixed_lambda: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        qg = np.asarray(self.q_grid, dtype=float)
        if qg.size == 0 or np.any(qg <= 0) or np.any(qg > 1) or np.any(np.diff(qg) <= 0):
            raise ValueError("q_grid must be nonempty, sorted and within (0, 1]")
        if min(self.support) < 1:
            raise ValueError("degrees must be >= 1")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")
        if self.fixed_delta is not None and len(self.fixed_delta) != self.n_levels:
            raise ValueError("fixed_delta must have n_levels entries")
        if self.fixed_lambda is not None and len(self.fixed_lambda) != len(self.support):
            raise ValueError("fixed_lambda must match the degree support")
        object.__setattr__(self, "q_grid", qg)

    @property
    def n_lambda(self) -> int:
        return 0 if self.fixed_lambda is not None else len(self.support)

    @property
    def n_delta(self) -> int:
        return 0 if self.fixed_delta is not None else self.n_levels - 1

    @property
    def dim(self) -> int:
        return 1 + self.n_lambda + self.n_delta

    def bounds(self) -> np.ndarray:
        b = [self.g_bounds] + [(0.0, 1.0)] * (self.n_lambda + self.n_delta)
        return np.array(b, dtype=float)

    def decode(self, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        g = float(x[0])
        lam = np.asarray(self.fixed_lambda if self.fixed_lambda is not None
                         else x[1:1 + self.n_lambda], dtype=float)
        if self.fixed_delta is not None:
            delta = np.asarray(self.fixed_delta, dtype=float)
        else:
            cuts = np.sort(np.clip(x[1 + self.n_lambda:], 0, 1))
            delta = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
        return g, lam, delta

    def power(self, delta: np.ndarray) -> PowerModel:
        return PowerModel.geometric(tuple(delta), self.beta, self.k) if len(delta) > 1 \
            else PowerModel((1.0,), (1.0,), self.beta, self.k)


@dataclass(frozen=True)
class OptimizerSettings:
    population: int = 50
    mutation_factor: float = 0.8
    crossover: float = 0.9
    generations: int = 300
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.mutation_factor < 2:
            raise ValueError("mutation factor must lie in (0, 2)")
        if not 0 <= self.crossover <= 1:
            raise ValueError("crossover must lie in [0, 1]")
        if self.population < 8:
            raise ValueError("population must be >= 8")


@dataclass
class OptimizationResult:
    best_g: float
    best_lambda: np.ndarray
    best_delta: np.ndarray
    feasible: bool
    history: list[float]
    support: tuple[int, ...] = ()

    @property
    def lambda_node(self) -> dict[int, float]:
        w = {l: v / l for l, v in zip(self.support, self.best_lambda) if v > 0}
        s = sum(w.values())
        return {l: v / s for l, v in w.items()}

    @property
    def lambda_edge(self) -> dict[int, float]:
        return {l: float(v) for l, v in zip(self.support, self.best_lambda) if v > 0}

    def to_json(self) -> dict:
        return {
            "best_g": self.best_g,
            "lambda_node": {str(l): v for l, v in self.lambda_node.items()},
            "lambda_edge": {str(l): v for l, v in self.lambda_edge.items()},
            "delta": [float(v) for v in self.best_delta],
            "feasible": self.feasible,
        }


def _slot_map(g: float, R: float, power: PowerModel):
    if power.n == 1:
        return lambda q: 1 - np.exp(-g * R * q)
    if power.n == 2:
        d = float(power.delta[0])
        return lambda q: f_p_2level(q, g, R, d)
    L = slot_truncation(g, R)
    return _thinned_update(g * R, capture_coefficients(power, L).table[L, :L])


def violations(g: float, lam: Sequence[float], delta: Sequence[float],
               problem: OptimizationProblem) -> int:
    """Number of grid points where q > f_q(f_p(q)) + margin fails; -1 for a simplex violation."""
    lam = np.asarray(lam, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if (np.any(lam < 0) or abs(lam.sum() - 1) > 1e-9 or np.any(delta < 0)
            or abs(delta.sum() - 1) > 1e-9 or g <= 0):
        return -1
    support = np.asarray(problem.support)
    R = 1.0 / float(np.sum(lam / support))
    fp = _slot_map(g, R, problem.power(delta))
    q = problem.q_grid
    p = np.clip(fp(q), 0.0, 1.0)
    fq = (lam[None, :] * p[:, None] ** (support[None, :] - 1)).sum(axis=1)
    return int(np.count_nonzero(q - fq <= MARGIN))


def feasible(candidate, problem: OptimizationProblem) -> bool:
    g, lam, delta = candidate
    return violations(g, lam, np.atleast_1d(delta), problem) == 0


def _repair(x: np.ndarray, problem: OptimizationProblem, lo, hi) -> np.ndarray:
    x = np.clip(x, lo, hi)
    if problem.n_lambda:
        lam = np.clip(x[1:1 + problem.n_lambda], 0, None)
        s = lam.sum()
        lam = lam / s if s > 0 else np.full(lam.size, 1.0 / lam.size)
        x[1:1 + problem.n_lambda] = lam
    return x


def _fitness(x, problem) -> float:
    g, lam, delta = problem.decode(x)
    v = violations(g, lam, delta, problem)
    if v < 0:
        v = len(problem.q_grid) + 1
    return g - PENALTY * v


def optimize(problem: OptimizationProblem, settings: OptimizerSettings = OptimizerSettings()
             ) -> OptimizationResult:
    """DE/rand/1/bin maximizing g - penalty * (violated grid constraints)."""
    rng = np.random.default_rng(settings.seed)
    bnd = problem.bounds()
    lo, hi = bnd[:, 0], bnd[:, 1]
    NP, D = settings.population, problem.dim
    pop = lo + rng.random((NP, D)) * (hi - lo)
    pop = np.array([_repair(x, problem, lo, hi) for x in pop])

    def evaluate(xs):
        if settings.workers > 1:
            with ThreadPoolExecutor(settings.workers) as ex:
                return np.array(list(ex.map(lambda x: _fitness(x, problem), xs)))
        return np.array([_fitness(x, problem) for x in xs])

    fit = evaluate(pop)
    history = [float(fit.max())]
    for _ in range(settings.generations):
        trials = np.empty_like(pop)
        for i in range(NP):
            choices = [j for j in range(NP) if j != i]
            a, b, c = rng.choice(choices, size=3, replace=False)
            mutant = pop[a] + settings.mutation_factor * (pop[b] - pop[c])
            cross = rng.random(D) < settings.crossover
            cross[rng.integers(D)] = True
            trials[i] = _repair(np.where(cross, mutant, pop[i]), problem, lo, hi)
        tfit = evaluate(trials)
        better = tfit >= fit
        pop[better] = trials[better]
        fit[better] = tfit[better]
        history.append(float(fit.max()))
    best = int(np.argmax(fit))
    g, lam, delta = problem.decode(pop[best])
    ok = violations(g, lam, delta, problem) == 0
    return OptimizationResult(g, lam, delta, ok, history, tuple(problem.support))
