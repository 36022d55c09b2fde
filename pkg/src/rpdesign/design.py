"""Robust parameter design over a fitted response surface.

Two formulations are solved over box-bounded control settings:

* constrained-target -- minimize the variance surface subject to the mean
  surface hitting a target, handled by an increasing quadratic-penalty
  schedule around a derivative-free simplex search;
* weighted -- minimize alpha * Var + (1 - alpha) * (mean - target)^2.

Signal-to-noise goals reuse the same search engine on surface versions of
the Taguchi ratios.  The closed-form transmitted-variance minimizer and
the three sample SNR statistics live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .data import Bounds
from .rsm import RsmModel, mean_surface, variance_surface, _check_sigma_z

# Penalty weights for the equality constraint, applied in increasing order.
RHO_SCHEDULE = tuple(10.0 ** k for k in range(7))
DEFAULT_STARTS = 16
MAX_SIMPLEX_ITER = 2000


class Formulation(Enum):
    CONSTRAINED_TARGET = "constrained_target"
    WEIGHTED = "weighted"
    SNR_NOMINAL = "snr_nominal"
    SNR_LARGER = "snr_larger"
    SNR_SMALLER = "snr_smaller"


_NEEDS_TARGET = {Formulation.CONSTRAINED_TARGET, Formulation.WEIGHTED, Formulation.SNR_NOMINAL}


@dataclass(frozen=True)
class DesignGoal:
    formulation: Formulation
    target: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.formulation in _NEEDS_TARGET:
            if self.target is None or not math.isfinite(self.target):
                raise ValueError(f"{self.formulation.value} requires a finite target")
        elif self.target is not None:
            raise ValueError(f"{self.formulation.value} does not take a target")
        if self.formulation is Formulation.WEIGHTED:
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("weighted formulation requires alpha in (0, 1)")
        elif self.alpha is not None:
            raise ValueError("alpha applies to the weighted formulation only")


@dataclass(frozen=True)
class DesignSolution:
    x_hat: np.ndarray
    predicted_mean: float
    predicted_variance: float
    constraint_residual: float
    converged: bool
    restarts_used: int
    at_bound: tuple[bool, ...]
    objective: float  # search objective used to pick this solution

    def __post_init__(self):
        self.x_hat.setflags(write=False)

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "predicted_mean": self.predicted_mean,
            "predicted_variance": self.predicted_variance,
            "constraint_residual": self.constraint_residual,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "at_bound": list(self.at_bound),
            "objective": self.objective,
        }


class VarianceMinimum(NamedTuple):
    x: np.ndarray
    degenerate: bool


def closed_form_variance_min(m: RsmModel) -> VarianceMinimum:
    """Unconstrained minimizer of the transmitted variance.

    The quadratic (b3 + B4'x)' Sigma (b3 + B4'x) is minimized by the
    least-squares solution of B4'x ~ -b3; the minimum-norm solution is
    returned.  With B4 = 0 the variance is constant in x and the zero
    vector is returned with a degenerate flag.
    """
    s = len(m.subset)
    if s == 0:
        return VarianceMinimum(np.zeros(0), True)
    if not np.any(m.beta4):
        return VarianceMinimum(np.zeros(s), True)
    x, _, _, _ = np.linalg.lstsq(m.beta4.T, -m.beta3, rcond=None)
    return VarianceMinimum(x, False)


def _objective_mode(goal: DesignGoal) -> int:
    return {
        Formulation.CONSTRAINED_TARGET: K.OBJ_PENALIZED_TARGET,
        Formulation.WEIGHTED: K.OBJ_WEIGHTED,
        Formulation.SNR_NOMINAL: K.OBJ_NEG_SNR_NOMINAL,
        Formulation.SNR_LARGER: K.OBJ_NEG_SNR_LARGER,
        Formulation.SNR_SMALLER: K.OBJ_NEG_SNR_SMALLER,
    }[goal.formulation]


def _start_points(
    bounds: Bounds, names: tuple[str, ...], n_starts: int, seed: int
) -> list[np.ndarray]:
    lo, hi = bounds.arrays(names)
    starts = [np.clip(p, lo, hi) for p in bounds.start_lattice(names)]
    starts = starts[:n_starts]
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        starts.append(rng.uniform(lo, hi))
    return starts


def optimize_design(
    m: RsmModel,
    goal: DesignGoal,
    bounds: Bounds,
    sigma_z,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    max_iter: int = MAX_SIMPLEX_ITER,
) -> DesignSolution:
    """Search the bounded control box for the goal's best setting.

    Constrained-target runs the penalty schedule rho = 1, 10, ..., 1e6 on
    (mean - t)^2, warm-starting each stage from the previous one and
    keeping, per start, the incumbent with the smallest constraint
    residual.  All other goals run a single simplex search per start.  The
    winner across restarts minimizes the final objective (at the largest
    rho for constrained-target); exact bookkeeping, no tolerance.

    converged means the winning restart's simplex met its diameter
    criterion and, for constrained-target, the residual is within
    1e-3 * (1 + |t|).  On an unattainable target the best-effort solution
    is still returned with converged = False.
    """
    sigma_z = _check_sigma_z(m, sigma_z)
    names = m.subset
    s = len(names)
    if not np.all(np.isfinite(m.coef)):
        raise ValueError("model has non-finite coefficients")
    t = float(goal.target) if goal.target is not None else 0.0
    alpha = float(goal.alpha) if goal.alpha is not None else 0.5
    mode = _objective_mode(goal)

    if s == 0:
        mean = m.beta0
        var = variance_surface(m, np.zeros(0), sigma_z)
        residual = abs(mean - t) if goal.formulation in _NEEDS_TARGET else 0.0
        tol = 1e-3 * (1.0 + abs(t))
        converged = goal.formulation is not Formulation.CONSTRAINED_TARGET or residual <= tol
        return DesignSolution(
            x_hat=np.zeros(0),
            predicted_mean=mean,
            predicted_variance=var,
            constraint_residual=residual,
            converged=converged,
            restarts_used=0,
            at_bound=(),
            objective=var,
        )

    lo, hi = bounds.arrays(names)
    starts = _start_points(bounds, names, n_starts, seed)
    args = (m.beta0, m.beta1, m.beta2, m.beta3, m.beta4, m.sigma2, sigma_z)
    rho_final = RHO_SCHEDULE[-1]

    best_x = None
    best_obj = np.inf
    best_converged = False
    for x0 in starts:
        if goal.formulation is Formulation.CONSTRAINED_TARGET:
            x = x0
            inc_x = None
            inc_residual = np.inf
            inc_conv = False
            for rho in RHO_SCHEDULE:
                x, _, _, conv = K.nelder_mead_design(
                    x, lo, hi, *args, mode, rho, alpha, t, max_iter
                )
                residual = abs(mean_surface(m, x) - t)
                if residual <= inc_residual:
                    inc_x = x
                    inc_residual = residual
                    inc_conv = conv
            final_x, final_conv = inc_x, inc_conv
        else:
            final_x, _, _, final_conv = K.nelder_mead_design(
                x0, lo, hi, *args, mode, 0.0, alpha, t, max_iter
            )
        obj = float(
            K.design_objective(final_x, *args, mode, rho_final, alpha, t)
        )
        if obj < best_obj:
            best_obj = obj
            best_x = final_x
            best_converged = final_conv

    x_hat = np.asarray(best_x, dtype=np.float64)
    mean = mean_surface(m, x_hat)
    var = variance_surface(m, x_hat, sigma_z)
    residual = abs(mean - t) if goal.formulation in _NEEDS_TARGET else 0.0
    tol = 1e-3 * (1.0 + abs(t))
    converged = bool(best_converged)
    if goal.formulation is Formulation.CONSTRAINED_TARGET:
        converged = converged and residual <= tol
    return DesignSolution(
        x_hat=x_hat,
        predicted_mean=mean,
        predicted_variance=var,
        constraint_residual=residual,
        converged=converged,
        restarts_used=len(starts),
        at_bound=tuple(bool(x_hat[i] == lo[i] or x_hat[i] == hi[i]) for i in range(s)),
        objective=best_obj,
    )


class SnrMode(Enum):
    NOMINAL = "nominal"
    LARGER = "larger"
    SMALLER = "smaller"


class DegenerateStatisticError(ValueError):
    """SNR statistic is undefined for the supplied sample."""


def snr(y, mode: SnrMode, t: float | None = None, center: str = "target") -> float:
    """Taguchi signal-to-noise ratio of a response sample, in decibels.

    nominal: 10 log10(ybar^2 / s^2) with s^2 = sum((y_i - t)^2) / (n - 1);
    the deviation is taken about the stated target, not the sample mean,
    matching the source formulation (center="mean" switches to the
    conventional sample variance).
    larger:  -10 log10(mean(1 / y_i^2))
    smaller: -10 log10(mean(y_i^2))
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    if mode is SnrMode.NOMINAL:
        if n < 2:
            raise ValueError("nominal SNR needs at least 2 observations")
        if t is None:
            raise ValueError("nominal SNR requires a target t")
        ybar = float(y.mean())
        ref = ybar if center == "mean" else float(t)
        s2 = float(np.sum((y - ref) ** 2)) / (n - 1)
        if s2 == 0.0:
            raise DegenerateStatisticError("nominal SNR undefined: zero sample variance")
        if ybar == 0.0:
            raise DegenerateStatisticError("nominal SNR undefined: zero sample mean")
        return 10.0 * math.log10(ybar * ybar / s2)
    if n < 1:
        raise ValueError("SNR needs at least 1 observation")
    if mode is SnrMode.LARGER:
        if np.any(y == 0.0):
            raise DegenerateStatisticError("larger-is-better SNR undefined: zero response value")
        return -10.0 * math.log10(float(np.mean((1.0 / y) ** 2)))
    if mode is SnrMode.SMALLER:
        mean_sq = float(np.mean(y ** 2))
        if mean_sq == 0.0:
            raise DegenerateStatisticError("smaller-is-better SNR undefined: all responses zero")
        return -10.0 * math.log10(mean_sq)
    raise ValueError(f"unknown SNR mode {mode!r}")
