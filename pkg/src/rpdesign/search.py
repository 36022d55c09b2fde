"""Wrapper search over binary control-variable subsets.

Each candidate subset is scored by the quality of the parameter design it
supports: fit the response surface on the subset, run the design
optimizer, and combine transmitted variance, cross-validated residual
variance, a constraint-violation penalty, and a small cardinality penalty
into a single minimized objective.  A seeded genetic algorithm explores
the 2^L patterns; an exhaustive enumerator provides the validation oracle
for small pools.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Bounds, Dataset, FoldAssignment, derive_bounds, noise_covariance, split_folds
from .design import DesignGoal, DesignSolution, Formulation, optimize_design
from .rsm import RsmModel, build_design_matrix, fit_rsm, variance_surface

EXHAUSTIVE_POOL_CAP = 20
DEFAULT_FOLDS = 5
LOO_THRESHOLD = 25  # below this many rows use leave-one-out


@dataclass(frozen=True)
class GaConfig:
    population: int
    generations: int
    tournament_size: int = 2
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # default 1/L
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be in [0, population)")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")


@dataclass(frozen=True)
class FitnessWeights:
    """Penalty weights; None means derive from target and response scale."""

    rho_v: float | None = None  # constraint penalty, default 1e3 / (1 + t^2)
    rho_c: float | None = None  # cardinality penalty, default 1e-3 * var(y)

    def resolve(self, goal: DesignGoal, y: np.ndarray) -> tuple[float, float]:
        t = goal.target if goal.target is not None else 0.0
        rho_v = self.rho_v if self.rho_v is not None else 1e3 / (1.0 + t * t)
        rho_c = self.rho_c if self.rho_c is not None else 1e-3 * float(np.var(y))
        return rho_v, rho_c


@dataclass(frozen=True)
class Fitness:
    objective: float
    components: dict[str, float]
    solution: DesignSolution
    model: RsmModel

    def __post_init__(self):
        total = sum(self.components.values())
        if not np.isclose(total, self.objective, rtol=0, atol=1e-9 * (1 + abs(total))):
            raise ValueError("objective must equal the sum of its components")


class FitnessEvaluator:
    """Scores subsets against one dataset/goal; memoizes by bit pattern."""

    def __init__(
        self,
        d: Dataset,
        goal: DesignGoal,
        pool: Sequence[str],
        folds: FoldAssignment | None = None,
        bounds: Bounds | None = None,
        weights: FitnessWeights = FitnessWeights(),
        optimizer_seed: int = 0,
    ):
        for c in pool:
            if c not in d.control_names:
                raise KeyError(f"pool column {c!r} is not a control column")
        self.d = d
        self.goal = goal
        self.pool = tuple(pool)
        if folds is None:
            k = d.n if d.n < LOO_THRESHOLD else DEFAULT_FOLDS
            folds = split_folds(d, min(k, d.n), seed=optimizer_seed)
        self.folds = folds
        self.bounds = bounds if bounds is not None else derive_bounds(d)
        self.sigma_z = noise_covariance(d)
        self.rho_v, self.rho_c = weights.resolve(goal, d.response)
        self.optimizer_seed = optimizer_seed
        self._cache: dict[tuple[bool, ...], Fitness] = {}
        self.n_evaluations = 0

    def subset_for(self, bits) -> tuple[str, ...]:
        return tuple(c for c, b in zip(self.pool, bits) if b)

    def _cv_sigma2(self, subset: tuple[str, ...]) -> float:
        dm = build_design_matrix(self.d, subset)
        X, y = dm.matrix, self.d.response
        sq = np.empty(self.d.n)
        for fold in range(self.folds.k):
            test = self.folds.fold_indices(fold)
            train = np.nonzero(self.folds.membership != fold)[0]
            coef, _, _, _ = np.linalg.lstsq(X[train], y[train], rcond=None)
            resid = y[test] - X[test] @ coef
            sq[test] = resid ** 2
        return float(sq.mean())

    def evaluate(self, bits) -> Fitness:
        key = tuple(bool(b) for b in bits)
        if len(key) != len(self.pool):
            raise ValueError(f"chromosome length {len(key)} != pool size {len(self.pool)}")
        hit = self._cache.get(key)
        if hit is not None:
            return hit

        subset = self.subset_for(key)
        model = fit_rsm(build_design_matrix(self.d, subset), self.d.response)
        solution = optimize_design(
            model, self.goal, self.bounds, self.sigma_z, seed=self.optimizer_seed
        )
        transmitted = max(solution.predicted_variance - model.sigma2, 0.0)
        cv_sigma2 = self._cv_sigma2(subset)
        components = {
            "transmitted_variance": transmitted,
            "cv_sigma2": cv_sigma2,
            "constraint_penalty": self.rho_v * solution.constraint_residual ** 2,
            "cardinality_penalty": self.rho_c * sum(key),
        }
        fitness = Fitness(
            objective=sum(components.values()),
            components=components,
            solution=solution,
            model=model,
        )
        self._cache[key] = fitness
        self.n_evaluations += 1
        return fitness


def evaluate_fitness(
    bits,
    d: Dataset,
    goal: DesignGoal,
    folds: FoldAssignment | None = None,
    pool: Sequence[str] | None = None,
    bounds: Bounds | None = None,
    weights: FitnessWeights = FitnessWeights(),
) -> Fitness:
    """One-off fitness of a single chromosome (see FitnessEvaluator)."""
    pool = tuple(pool) if pool is not None else d.control_names
    ev = FitnessEvaluator(d, goal, pool, folds=folds, bounds=bounds, weights=weights)
    return ev.evaluate(bits)


@dataclass(frozen=True)
class GenerationStat:
    generation: int
    best_objective: float
    mean_objective: float
    best_bits: str


@dataclass(frozen=True)
class SearchResult:
    pool: tuple[str, ...]
    best_bits: tuple[bool, ...]
    best_fitness: Fitness
    history: tuple[GenerationStat, ...]
    evaluations: int
    table: tuple[tuple[tuple[bool, ...], float], ...] = field(default=())

    @property
    def selected(self) -> tuple[str, ...]:
        return tuple(c for c, b in zip(self.pool, self.best_bits) if b)


def _bits_str(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def ga_search(
    d: Dataset,
    goal: DesignGoal,
    cfg: GaConfig,
    pool: Sequence[str] | None = None,
    folds: FoldAssignment | None = None,
    bounds: Bounds | None = None,
    weights: FitnessWeights = FitnessWeights(),
) -> SearchResult:
    """Genetic-algorithm subset search with tournament selection.

    Seeded uniform-random initialization, tournament selection, uniform
    crossover, per-bit flip mutation (default rate 1/L), and elitism.
    Runs exactly cfg.generations evolution steps after the initial
    population; the per-generation history best is non-increasing whenever
    elitism is at least 1, and the returned best is the best individual
    ever evaluated regardless of elitism.
    """
    pool = tuple(pool) if pool is not None else d.control_names
    L = len(pool)
    if L < 1:
        raise ValueError("pool must contain at least one variable")
    ev = FitnessEvaluator(
        d, goal, pool, folds=folds, bounds=bounds, weights=weights, optimizer_seed=cfg.seed
    )
    rng = np.random.default_rng(cfg.seed)
    p_mut = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / L

    population = rng.random((cfg.population, L)) < 0.5
    scores = np.array([ev.evaluate(ind).objective for ind in population])

    best_idx = int(np.argmin(scores))
    best_bits = tuple(bool(b) for b in population[best_idx])
    best_obj = float(scores[best_idx])

    history = [
        GenerationStat(0, best_obj, float(scores.mean()), _bits_str(population[best_idx]))
    ]

    for gen in range(1, cfg.generations + 1):
        order = np.argsort(scores, kind="stable")
        new_pop = [population[i].copy() for i in order[: cfg.elitism]]
        while len(new_pop) < cfg.population:
            parents = []
            for _ in range(2):
                contenders = rng.integers(0, cfg.population, size=cfg.tournament_size)
                winner = contenders[np.argmin(scores[contenders])]
                parents.append(population[winner])
            child = parents[0].copy()
            if rng.random() < cfg.crossover_prob:
                take_second = rng.random(L) < 0.5
                child[take_second] = parents[1][take_second]
            flip = rng.random(L) < p_mut
            child[flip] = ~child[flip]
            new_pop.append(child)
        population = np.array(new_pop)
        scores = np.array([ev.evaluate(ind).objective for ind in population])

        gen_best = int(np.argmin(scores))
        if scores[gen_best] < best_obj:
            best_obj = float(scores[gen_best])
            best_bits = tuple(bool(b) for b in population[gen_best])
        history.append(
            GenerationStat(
                gen, float(scores[gen_best]), float(scores.mean()), _bits_str(population[gen_best])
            )
        )

    return SearchResult(
        pool=pool,
        best_bits=best_bits,
        best_fitness=ev.evaluate(best_bits),
        history=tuple(history),
        evaluations=ev.n_evaluations,
    )


def exhaustive_search(
    d: Dataset,
    goal: DesignGoal,
    pool: Sequence[str] | None = None,
    folds: FoldAssignment | None = None,
    bounds: Bounds | None = None,
    weights: FitnessWeights = FitnessWeights(),
    optimizer_seed: int = 0,
) -> SearchResult:
    """Score every subset of the pool; the oracle for GA validation.

    Ties break toward fewer selected bits, then lexicographic bit order.
    The full (pattern, objective) table is kept on the result.
    """
    pool = tuple(pool) if pool is not None else d.control_names
    L = len(pool)
    if L > EXHAUSTIVE_POOL_CAP:
        raise ValueError(f"pool size {L} exceeds exhaustive cap {EXHAUSTIVE_POOL_CAP}")
    ev = FitnessEvaluator(
        d, goal, pool, folds=folds, bounds=bounds, weights=weights, optimizer_seed=optimizer_seed
    )
    table = []
    best_key = None
    best_sort = None
    for code in range(2 ** L):
        bits = tuple(bool((code >> i) & 1) for i in range(L))
        fit = ev.evaluate(bits)
        table.append((bits, fit.objective))
        sort_key = (fit.objective, sum(bits), bits)
        if best_sort is None or sort_key < best_sort:
            best_sort = sort_key
            best_key = bits
    best = ev.evaluate(best_key)
    history = (GenerationStat(0, best.objective, float(np.mean([o for _, o in table])),
                              _bits_str(best_key)),)
    return SearchResult(
        pool=pool,
        best_bits=best_key,
        best_fitness=best,
        history=history,
        evaluations=ev.n_evaluations,
        table=tuple(table),
    )
