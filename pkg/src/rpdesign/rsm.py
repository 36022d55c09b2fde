"""Quadratic dual response surfaces: design matrix, OLS fit, mean/variance.

The response model is

    Y(x, z) = b0 + x'b1 + x'B2 x + z'b3 + x'B4 z + eps,  eps ~ N(0, sigma2)

with all first- and second-order control terms, first-order noise terms,
and control-by-noise interactions.  Noise-by-noise and squared-noise terms
are deliberately absent.  The mean surface over zero-mean noise is
b0 + x'b1 + x'B2 x; the variance surface is
(b3 + B4'x)' Sigma_z (b3 + B4'x) + sigma2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import Dataset

# Relative condition estimate above which the ridge fallback kicks in.
_COND_LIMIT = 1e10
_RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray  # (n, p)
    labels: tuple[str, ...]
    subset: tuple[str, ...]
    noise_ids: tuple[str, ...]

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def p(self) -> int:
        return self.matrix.shape[1]


def term_count(s: int, q: int) -> int:
    return 1 + s + s * (s + 1) // 2 + q + s * q


def term_labels(subset: Sequence[str], noise_ids: Sequence[str]) -> tuple[str, ...]:
    labels = ["intercept"]
    labels.extend(subset)
    for i in range(len(subset)):
        for j in range(i, len(subset)):
            labels.append(f"{subset[i]}*{subset[j]}")
    labels.extend(noise_ids)
    for x in subset:
        for z in noise_ids:
            labels.append(f"{x}*{z}")
    return tuple(labels)


def design_columns(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Assemble model term columns for control block x (n,s) and noise block z (n,q)."""
    n = x.shape[0] if x.ndim == 2 else z.shape[0]
    x = x.reshape(n, -1)
    z = z.reshape(n, -1)
    s = x.shape[1]
    cols = [np.ones((n, 1))]
    if s:
        cols.append(x)
        quad = [x[:, [i]] * x[:, [j]] for i in range(s) for j in range(i, s)]
        cols.append(np.hstack(quad))
    if z.shape[1]:
        cols.append(z)
    if s and z.shape[1]:
        inter = [x[:, [i]] * z for i in range(s)]
        cols.append(np.hstack(inter))
    return np.hstack(cols)


def build_design_matrix(d: Dataset, subset: Sequence[str]) -> DesignMatrix:
    """Design matrix over the selected control subset plus all noise columns.

    Term order: intercept, linear controls in subset order, quadratics
    lexicographic (i <= j), linear noise, control-by-noise lexicographic.
    An empty subset yields intercept + noise terms only.
    """
    subset = tuple(subset)
    for c in subset:
        if c not in d.control_names:
            raise KeyError(f"unknown control column {c!r}")
    noise_ids = d.noise_names
    x = d.matrix(subset) if subset else np.empty((d.n, 0))
    z = d.matrix(noise_ids)
    matrix = design_columns(x, z)
    return DesignMatrix(
        matrix=matrix,
        labels=term_labels(subset, noise_ids),
        subset=subset,
        noise_ids=noise_ids,
    )


@dataclass(frozen=True)
class RsmModel:
    """Fitted quadratic response surface bound to its control subset.

    beta2 holds half the fitted cross coefficient off-diagonal so that
    x'beta2 x reproduces the fit; the raw coefficient is 2*beta2[i, j].
    """

    subset: tuple[str, ...]
    noise_ids: tuple[str, ...]
    beta0: float
    beta1: np.ndarray  # (s,)
    beta2: np.ndarray  # (s, s) symmetric
    beta3: np.ndarray  # (q,)
    beta4: np.ndarray  # (s, q)
    sigma2: float
    rank_deficient: bool = False
    ridge: bool = False
    r_squared: float = float("nan")
    n_obs: int = 0

    def __post_init__(self):
        s, q = len(self.subset), len(self.noise_ids)
        if self.beta1.shape != (s,) or self.beta2.shape != (s, s):
            raise ValueError("control coefficient dimensions inconsistent with subset")
        if self.beta3.shape != (q,) or self.beta4.shape != (s, q):
            raise ValueError("noise coefficient dimensions inconsistent with noise ids")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if s and np.max(np.abs(self.beta2 - self.beta2.T)) > 1e-12:
            raise ValueError("beta2 must be symmetric")
        for arr in (self.beta1, self.beta2, self.beta3, self.beta4):
            arr.setflags(write=False)

    @property
    def coef(self) -> np.ndarray:
        """Flat coefficient vector in design-matrix term order."""
        s = len(self.subset)
        quad = []
        for i in range(s):
            for j in range(i, s):
                quad.append(self.beta2[i, j] if i == j else 2.0 * self.beta2[i, j])
        return np.concatenate([
            [self.beta0], self.beta1, quad, self.beta3, self.beta4.ravel()
        ])

    @property
    def labels(self) -> tuple[str, ...]:
        return term_labels(self.subset, self.noise_ids)

    def predict(self, x, z) -> np.ndarray:
        """Evaluate the full response model (without the error term)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        n = max(x.shape[0], z.shape[0])
        if x.shape[0] == 1 and n > 1:
            x = np.broadcast_to(x, (n, x.shape[1]))
        if z.shape[0] == 1 and n > 1:
            z = np.broadcast_to(z, (n, z.shape[1]))
        return design_columns(x, z) @ self.coef

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "noise_ids": list(self.noise_ids),
            "terms": [
                {"label": lab, "coefficient": float(c)}
                for lab, c in zip(self.labels, self.coef)
            ],
            "beta0": self.beta0,
            "beta1": self.beta1.tolist(),
            "beta2": self.beta2.tolist(),
            "beta3": self.beta3.tolist(),
            "beta4": self.beta4.tolist(),
            "sigma2": self.sigma2,
            "diagnostics": {
                "rank_deficient": self.rank_deficient,
                "ridge": self.ridge,
                "r_squared": self.r_squared,
                "n_obs": self.n_obs,
            },
        }


def _unpack_coefficients(coef: np.ndarray, s: int, q: int) -> tuple:
    beta0 = float(coef[0])
    beta1 = coef[1:1 + s].copy()
    nq = s * (s + 1) // 2
    quad = coef[1 + s:1 + s + nq]
    beta2 = np.zeros((s, s))
    k = 0
    for i in range(s):
        for j in range(i, s):
            if i == j:
                beta2[i, i] = quad[k]
            else:
                beta2[i, j] = beta2[j, i] = 0.5 * quad[k]
            k += 1
    beta3 = coef[1 + s + nq:1 + s + nq + q].copy()
    beta4 = coef[1 + s + nq + q:].reshape(s, q).copy()
    return beta0, beta1, beta2, beta3, beta4


def fit_rsm(dm: DesignMatrix, y: np.ndarray) -> RsmModel:
    """Ordinary least squares fit of the quadratic response model.

    Solved by orthogonal decomposition (SVD-backed lstsq), never the normal
    equations.  When the design is rank deficient, n < p, or the condition
    estimate exceeds 1e10, a small ridge (lambda = 1e-8 tr(X'X)/p) is
    applied through an augmented least-squares system and flagged.
    sigma2 = RSS/(n-p) for n > p, RSS/n otherwise (flagged as deficient).
    """
    X = dm.matrix
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    if n == 0 or y.shape[0] != n:
        raise ValueError(f"response length {y.shape[0]} does not match {n} rows")

    coef, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
    ridge = bool(rank < p or n < p or cond > _COND_LIMIT)
    if ridge:
        lam = _RIDGE_SCALE * float(np.sum(X * X)) / p
        Xa = np.vstack([X, np.sqrt(lam) * np.eye(p)])
        ya = np.concatenate([y, np.zeros(p)])
        coef, _, _, _ = np.linalg.lstsq(Xa, ya, rcond=None)

    resid = y - X @ coef
    rss = float(resid @ resid)
    deficient = n <= p
    sigma2 = rss / (n - p) if n > p else rss / n
    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else float("nan")

    s, q = len(dm.subset), len(dm.noise_ids)
    beta0, beta1, beta2, beta3, beta4 = _unpack_coefficients(coef, s, q)
    return RsmModel(
        subset=dm.subset,
        noise_ids=dm.noise_ids,
        beta0=beta0,
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        beta4=beta4,
        sigma2=max(sigma2, 0.0),
        rank_deficient=bool(rank < p or deficient),
        ridge=ridge,
        r_squared=r_squared,
        n_obs=n,
    )


def fit_on_subset(d: Dataset, subset: Sequence[str]) -> RsmModel:
    dm = build_design_matrix(d, subset)
    return fit_rsm(dm, d.response)


def mean_surface(m: RsmModel, x) -> float:
    """Process mean at control setting x: b0 + x'b1 + x'B2 x."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != len(m.subset):
        raise ValueError(f"x has {x.shape[0]} entries, model expects {len(m.subset)}")
    return float(m.beta0 + x @ m.beta1 + x @ m.beta2 @ x)


def _check_sigma_z(m: RsmModel, sigma_z) -> np.ndarray:
    q = len(m.noise_ids)
    sigma_z = np.atleast_2d(np.asarray(sigma_z, dtype=np.float64))
    if sigma_z.shape != (q, q):
        raise ValueError(f"sigma_z shape {sigma_z.shape} does not match q={q}")
    if np.max(np.abs(sigma_z - sigma_z.T)) > 1e-8:
        raise ValueError("sigma_z must be symmetric")
    if q and np.linalg.eigvalsh(sigma_z).min() < -1e-10:
        raise ValueError("sigma_z must be positive semidefinite")
    return sigma_z


def variance_surface(m: RsmModel, x, sigma_z) -> float:
    """Process variance at x: (b3 + B4'x)' Sigma_z (b3 + B4'x) + sigma2."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != len(m.subset):
        raise ValueError(f"x has {x.shape[0]} entries, model expects {len(m.subset)}")
    sigma_z = _check_sigma_z(m, sigma_z)
    w = m.beta3 + m.beta4.T @ x
    return float(max(w @ sigma_z @ w, 0.0) + m.sigma2)


def delta_variance(
    predict: Callable[[np.ndarray], float],
    x,
    sigma_z,
    sigma2: float,
    step: float = 1e-5,
) -> float:
    """Transmission-of-error variance via central finite differences.

    ``predict(z)`` evaluates the response at control setting x (already
    bound into the callable or passed via closure) and noise vector z.  The
    gradient g of predict in z at z = 0 is estimated with central
    differences of the given step; returns g' Sigma_z g + sigma2.  Exact
    for models linear in z, which includes every fitted quadratic here.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    sigma_z = np.atleast_2d(np.asarray(sigma_z, dtype=np.float64))
    q = sigma_z.shape[0]
    g = np.empty(q)
    for k in range(q):
        zp = np.zeros(q)
        zp[k] = step
        hi = float(predict(zp))
        zp[k] = -step
        lo = float(predict(zp))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError("prediction is non-finite near z = 0")
        g[k] = (hi - lo) / (2.0 * step)
    return float(g @ sigma_z @ g + sigma2)


def model_delta_variance(m: RsmModel, x, sigma_z, step: float = 1e-5) -> float:
    """delta_variance applied to a fitted model's own prediction function."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return delta_variance(lambda z: float(m.predict(x, z)[0]), x, sigma_z, m.sigma2, step)
