"""Traditional sequential selection pipelines used as benchmark baselines.

Both baselines rank the control pool first (mutual-information filter or
random-forest importance), keep the top C variables, then hand off to the
same response-surface fit and design optimization as the wrapper method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .data import Bounds, Dataset, derive_bounds, noise_covariance
from .design import DesignGoal, DesignSolution, optimize_design
from .rsm import RsmModel, build_design_matrix, fit_rsm

MI_BIN_CAP = 32


@dataclass(frozen=True)
class RankedVariables:
    """(variable, score) pairs sorted by descending score, column order on ties."""

    entries: tuple[tuple[str, float], ...]
    constant_columns: tuple[str, ...] = ()
    split_counts: dict[str, int] | None = None  # forest rankings only

    def top(self, count: int) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries[:count])

    def score(self, name: str) -> float:
        for entry, value in self.entries:
            if entry == name:
                return value
        raise KeyError(name)


def _rank(pool: Sequence[str], scores: Sequence[float]) -> tuple[tuple[str, float], ...]:
    # stable sort keeps column order within ties
    order = sorted(range(len(pool)), key=lambda i: -scores[i])
    return tuple((pool[i], float(scores[i])) for i in order)


def _equal_frequency_bins(col: np.ndarray, bins: int) -> np.ndarray:
    """Rank-based equal-frequency bin indices; invariant to monotone transforms."""
    n = col.shape[0]
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(col, kind="stable")] = np.arange(n)
    return (ranks * bins) // n


def mutual_information_bits(a: np.ndarray, b: np.ndarray, bins: int) -> float:
    """Plug-in mutual information (base 2) between two binned columns."""
    ab = _equal_frequency_bins(a, bins)
    bb = _equal_frequency_bins(b, bins)
    joint = np.bincount(ab * bins + bb, minlength=bins * bins).astype(np.float64)
    joint = joint.reshape(bins, bins) / a.shape[0]
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(px, py)
    return float(np.sum(joint[nz] * np.log2(joint[nz] / outer[nz])))


def mi_rank(d: Dataset, pool: Sequence[str] | None = None, bins: int | str = "auto") -> RankedVariables:
    """Rank pool variables by mutual information with the response.

    Columns are discretized by equal-frequency binning; auto bin count is
    ceil(sqrt(n)) capped at 32.  Constant columns score 0 and are flagged
    rather than erroring.
    """
    if d.n < 4:
        raise ValueError("mutual-information ranking needs at least 4 observations")
    pool = tuple(pool) if pool is not None else d.control_names
    if bins == "auto":
        b = min(math.ceil(math.sqrt(d.n)), MI_BIN_CAP)
    else:
        b = int(bins)
        if b < 2:
            raise ValueError("bins must be at least 2")
    y = d.response
    scores = []
    constants = []
    for name in pool:
        col = d.column(name)
        if np.ptp(col) == 0.0:
            constants.append(name)
            scores.append(0.0)
        else:
            scores.append(mutual_information_bits(col, y, b))
    return RankedVariables(entries=_rank(pool, scores), constant_columns=tuple(constants))


@dataclass(frozen=True)
class RfConfig:
    trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 5
    features_per_split: int | str = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("trees must be at least 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")

    def resolve_features(self, pool_size: int) -> int:
        if self.features_per_split == "sqrt":
            return math.ceil(math.sqrt(pool_size))
        return int(self.features_per_split)


def rf_rank(d: Dataset, pool: Sequence[str] | None = None, cfg: RfConfig = RfConfig()) -> RankedVariables:
    """Rank pool variables by random-forest impurity-decrease importance.

    Regression trees on bootstrap samples with random feature subsets per
    split; importances are total variance-reduction per variable summed
    over trees and normalized to 1 (all zero when no split ever improved).
    Deterministic under cfg.seed.
    """
    pool = tuple(pool) if pool is not None else d.control_names
    if d.n < 2 * cfg.min_samples_leaf:
        raise ValueError(
            f"random forest needs at least 2*min_samples_leaf = {2 * cfg.min_samples_leaf} rows"
        )
    X = np.ascontiguousarray(d.matrix(pool))
    y = np.ascontiguousarray(d.response)
    rng = np.random.default_rng(cfg.seed)
    boot = rng.integers(0, d.n, size=(cfg.trees, d.n), dtype=np.int64)
    seeds = rng.integers(1, 2 ** 31 - 1, size=cfg.trees, dtype=np.int64)
    importance, split_counts = K.forest_importance(
        X, y, boot, seeds, cfg.max_depth, cfg.min_samples_leaf, cfg.resolve_features(len(pool))
    )
    total = float(importance.sum())
    if total > 0:
        importance = importance / total
    else:
        importance = np.zeros(len(pool))
    return RankedVariables(
        entries=_rank(pool, importance),
        split_counts={p: int(c) for p, c in zip(pool, split_counts)},
    )


@dataclass(frozen=True)
class PipelineResult:
    selected: tuple[str, ...]
    ranking: RankedVariables
    model: RsmModel
    solution: DesignSolution


def sequential_pipeline(
    d: Dataset,
    ranker: str,
    select_count: int,
    goal: DesignGoal,
    bounds: Bounds | None = None,
    mi_bins: int | str = "auto",
    rf_cfg: RfConfig = RfConfig(),
    optimizer_seed: int = 0,
) -> PipelineResult:
    """Rank, keep the top select_count variables, fit, and optimize.

    This is the screen-then-model sequence the wrapper method is compared
    against; noise columns skip the ranking stage and always enter the fit.
    """
    pool = d.control_names
    if not 1 <= select_count <= len(pool):
        raise ValueError(f"select_count must be in [1, {len(pool)}]")
    ranker = ranker.lower()
    if ranker == "mi":
        ranking = mi_rank(d, pool, bins=mi_bins)
    elif ranker == "rf":
        ranking = rf_rank(d, pool, cfg=rf_cfg)
    else:
        raise ValueError(f"unknown ranker {ranker!r}; expected 'mi' or 'rf'")
    top = ranking.top(select_count)
    selected = tuple(c for c in pool if c in top)  # restore column order
    model = fit_rsm(build_design_matrix(d, selected), d.response)
    if bounds is None:
        bounds = derive_bounds(d)
    solution = optimize_design(model, goal, bounds, noise_covariance(d), seed=optimizer_seed)
    return PipelineResult(selected=selected, ranking=ranking, model=model, solution=solution)
