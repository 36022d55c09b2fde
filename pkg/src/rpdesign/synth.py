"""Synthetic validation harness: ground-truth processes, sampling, metrics.

Eighteen built-in experiment settings define, per setting, the number of
real control / noise / dummy variables, the observation count, sampling
moments, coefficient scales, replication count, and GA budget.  Each
replication draws a fresh quadratic ground truth, samples an observational
dataset from it, derives the target response as the true mean at the
robust (least-transmitted-variance) setting, runs the wrapper method plus
the two sequential baselines on the same data, and scores selection
quality and coefficient recovery.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .baselines import RfConfig, sequential_pipeline
from .data import Bounds, Dataset, VariableRole, noise_covariance, standardize_noise
from .design import DesignGoal, Formulation, closed_form_variance_min, optimize_design
from .rsm import RsmModel, build_design_matrix, fit_rsm, mean_surface, variance_surface
from .search import FitnessWeights, GaConfig, ga_search

METHOD_PROPOSED = "proposed"
METHOD_MI = "mi"
METHOD_RF = "rf"
ALL_METHODS = (METHOD_PROPOSED, METHOD_MI, METHOD_RF)

# True-coefficient magnitudes below this multiple of their group scale are
# left out of the recovery-ratio averages (a near-zero denominator says
# nothing about fit quality).
RATIO_GUARD = 0.05
BOUNDS_SIGMA = 4.0  # synthetic optimizer box: mean +/- 4 sd per control column


@dataclass(frozen=True)
class ExperimentSetting:
    id: int
    n_control: int
    n_noise: int
    n_dummy: int
    n_obs: int
    sigma_eps: float
    sigma_x: float
    mean_x: float
    sigma_z: float
    mean_z: float
    sigma_d: float
    mean_d: float
    sigma_b1: float
    sigma_b2: float
    sigma_b3: float
    sigma_b4: float
    runs: int = 20
    ga_pop: int = 4
    ga_gens: int = 10

    def __post_init__(self):
        if min(self.n_control, self.n_noise, self.n_obs, self.runs) < 1 or self.n_dummy < 0:
            raise ValueError("counts must be positive (dummies may be zero)")
        for name in ("sigma_eps", "sigma_x", "sigma_z", "sigma_d",
                     "sigma_b1", "sigma_b2", "sigma_b3", "sigma_b4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def control_ids(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.n_control))

    @property
    def dummy_ids(self) -> tuple[str, ...]:
        return tuple(f"d{i + 1}" for i in range(self.n_dummy))

    @property
    def noise_ids(self) -> tuple[str, ...]:
        return tuple(f"z{i + 1}" for i in range(self.n_noise))

    @property
    def pool_ids(self) -> tuple[str, ...]:
        return self.control_ids + self.dummy_ids


def _setting(id, C, N, D, O, s_eps, s_x, m_x, s_z, m_z, s_d, m_d, b1, b2, b3, b4, runs, pop, gens):
    return ExperimentSetting(
        id=id, n_control=C, n_noise=N, n_dummy=D, n_obs=O, sigma_eps=s_eps,
        sigma_x=s_x, mean_x=m_x, sigma_z=s_z, mean_z=m_z, sigma_d=s_d, mean_d=m_d,
        sigma_b1=b1, sigma_b2=b2, sigma_b3=b3, sigma_b4=b4, runs=runs, ga_pop=pop, ga_gens=gens,
    )


BUILTIN_SETTINGS: dict[int, ExperimentSetting] = {
    s.id: s
    for s in (
        _setting(1, 2, 2, 2, 100, 1, 2, 0, 1, 0, 2, 0, 0.1, 0.5, 2, 0.5, 20, 4, 10),
        _setting(2, 2, 2, 2, 100, 1, 2, 1, 1, 0, 2, 1, 0.1, 0.1, 2, 0.1, 20, 4, 10),
        _setting(3, 2, 2, 2, 100, 1, 2, 10, 1, 0, 2, 10, 1, 0.01, 2, 0.01, 20, 4, 10),
        _setting(4, 2, 2, 2, 100, 1, 8, 0, 1, 0, 8, 0, 0.1, 0.5, 8, 0.5, 20, 4, 10),
        _setting(5, 2, 2, 2, 100, 1, 8, 1, 1, 0, 8, 1, 0.1, 0.1, 8, 0.1, 20, 4, 10),
        _setting(6, 2, 2, 2, 100, 1, 8, 10, 1, 0, 8, 10, 1, 0.01, 8, 0.01, 20, 4, 10),
        _setting(7, 4, 4, 4, 1000, 1, 2, 0, 1, 0, 2, 0, 0.1, 0.5, 2, 0.5, 20, 10, 25),
        _setting(8, 4, 4, 4, 1000, 1, 2, 1, 1, 0, 2, 1, 0.1, 0.1, 2, 0.1, 20, 10, 25),
        _setting(9, 4, 4, 4, 1000, 1, 2, 10, 1, 0, 2, 10, 1, 0.01, 2, 0.01, 20, 10, 25),
        _setting(10, 4, 4, 4, 1000, 1, 8, 0, 1, 0, 8, 0, 0.1, 0.5, 8, 0.5, 20, 10, 25),
        _setting(11, 4, 4, 4, 1000, 1, 8, 1, 1, 0, 8, 1, 0.1, 0.1, 8, 0.1, 20, 10, 25),
        _setting(12, 4, 4, 4, 1000, 1, 8, 10, 1, 0, 8, 10, 1, 0.01, 8, 0.01, 20, 10, 25),
        _setting(13, 8, 8, 8, 1000, 1, 2, 0, 1, 0, 2, 0, 0.1, 0.5, 2, 0.5, 20, 20, 60),
        _setting(14, 8, 8, 8, 1000, 1, 2, 1, 1, 0, 2, 1, 0.1, 0.1, 2, 0.1, 20, 20, 60),
        _setting(15, 8, 8, 8, 1000, 1, 2, 10, 1, 0, 2, 10, 1, 0.01, 2, 0.01, 20, 20, 60),
        _setting(16, 8, 8, 8, 1000, 1, 8, 0, 1, 0, 8, 0, 0.1, 0.5, 8, 0.5, 20, 20, 60),
        _setting(17, 8, 8, 8, 1000, 1, 8, 1, 1, 0, 8, 1, 0.1, 0.1, 8, 0.1, 20, 20, 60),
        _setting(18, 8, 8, 8, 1000, 1, 8, 10, 1, 0, 8, 10, 1, 0.01, 8, 0.01, 20, 20, 60),
    )
}


def get_setting(setting_id: int) -> ExperimentSetting:
    try:
        return BUILTIN_SETTINGS[setting_id]
    except KeyError:
        raise KeyError(f"no built-in experiment setting {setting_id}") from None


@dataclass(frozen=True)
class GroundTruthModel:
    """True process: quadratic coefficients, sampling moments, derived target."""

    model: RsmModel  # true coefficients over the real controls + noise
    setting: ExperimentSetting
    x_star: np.ndarray  # robust setting (unconstrained transmitted-variance min)
    target: float  # true mean at x_star
    degenerate: bool  # no control-by-noise coupling anywhere

    @property
    def control_ids(self) -> tuple[str, ...]:
        return self.model.subset

    @property
    def dummy_ids(self) -> tuple[str, ...]:
        return self.setting.dummy_ids


def generate_ground_truth(s: ExperimentSetting, seed) -> GroundTruthModel:
    """Draw true coefficients (zero-mean Gaussians at the setting's scales).

    beta0 is fixed at 0 (any intercept is absorbed by fitting and merely
    shifts the target).  beta2 is drawn on the upper triangle and
    symmetrized.  The robust setting is the closed-form transmitted-
    variance minimizer and the target is the true mean there.
    """
    rng = np.random.default_rng(seed)
    C, N = s.n_control, s.n_noise
    beta1 = rng.normal(0.0, s.sigma_b1, size=C)
    beta2 = np.zeros((C, C))
    for i in range(C):
        for j in range(i, C):
            v = rng.normal(0.0, s.sigma_b2)
            beta2[i, j] = beta2[j, i] = v
    beta3 = rng.normal(0.0, s.sigma_b3, size=N)
    beta4 = rng.normal(0.0, s.sigma_b4, size=(C, N))
    model = RsmModel(
        subset=s.control_ids,
        noise_ids=s.noise_ids,
        beta0=0.0,
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        beta4=beta4,
        sigma2=s.sigma_eps ** 2,
        n_obs=0,
    )
    x_star, degenerate = closed_form_variance_min(model)
    target = mean_surface(model, x_star)
    return GroundTruthModel(
        model=model, setting=s, x_star=x_star, target=target, degenerate=degenerate
    )


def sample_observations(g: GroundTruthModel, s: ExperimentSetting, seed) -> Dataset:
    """Sample an observational dataset from the ground truth.

    Controls, noise, and dummies are independent Gaussians at the
    setting's moments; the response follows the true model plus
    N(0, sigma_eps^2) error.  Dummy columns enter the dataset with the
    CONTROL role: telling them apart from real controls is the selectors'
    job.
    """
    rng = np.random.default_rng(seed)
    n = s.n_obs
    X = rng.normal(s.mean_x, s.sigma_x, size=(n, s.n_control))
    Z = rng.normal(s.mean_z, s.sigma_z, size=(n, s.n_noise))
    D = rng.normal(s.mean_d, s.sigma_d, size=(n, s.n_dummy))
    eps = rng.normal(0.0, s.sigma_eps, size=n)
    y = g.model.predict(X, Z) + eps

    names = s.control_ids + s.dummy_ids + s.noise_ids + ("y",)
    values = np.column_stack([X, D, Z, y])
    roles: dict[str, VariableRole] = {}
    for c in s.control_ids + s.dummy_ids:
        roles[c] = VariableRole.CONTROL
    for z in s.noise_ids:
        roles[z] = VariableRole.NOISE
    roles["y"] = VariableRole.RESPONSE
    return Dataset(names=names, values=values, roles=roles)


def synthetic_bounds(d: Dataset, sigma: float = BOUNDS_SIGMA) -> Bounds:
    """mean +/- sigma * sd box per control column (synthetic-run default)."""
    lows, highs, quantiles = {}, {}, {}
    for c in d.control_names:
        col = d.column(c)
        mu, sd = float(col.mean()), float(col.std(ddof=1))
        lows[c] = mu - sigma * sd
        highs[c] = mu + sigma * sd
        quantiles[c] = tuple(float(v) for v in np.quantile(col, (0.25, 0.5, 0.75)))
    return Bounds(lows=lows, highs=highs, quantiles=quantiles)


def true_optimum_variance(g: GroundTruthModel, bounds: Bounds, sigma_z: np.ndarray) -> float:
    """Least true process variance attainable inside the bounds.

    Uses the closed-form minimizer when it falls inside the box, otherwise
    a pure-variance simplex search; this is the yardstick every method's
    recommendation is compared against under the true model.
    """
    lo, hi = bounds.arrays(g.control_ids)
    if np.all((g.x_star >= lo) & (g.x_star <= hi)):
        return variance_surface(g.model, g.x_star, sigma_z)
    # robust setting outside coverage: weighted goal with alpha ~ 1 reduces
    # to pure in-box variance minimization
    sol = optimize_design(
        g.model,
        DesignGoal(Formulation.WEIGHTED, target=g.target, alpha=1.0 - 1e-12),
        bounds,
        sigma_z,
    )
    return sol.predicted_variance


@dataclass(frozen=True)
class ReplicationRecord:
    setting_id: int
    replication: int
    method: str
    seed: int
    selected: tuple[str, ...]
    real_fraction: float
    dummy_fraction: float
    ratio_means: dict[str, float]  # group -> mean(beta_true / beta_hat), NaN if empty
    ratio_counts: dict[str, int]
    missing_counts: dict[str, int]
    target_gap_true: float  # |true mean at x_hat - t|
    variance_true: float  # true process variance at x_hat
    variance_optimum: float  # best true variance attainable in bounds
    predicted_mean: float
    predicted_variance: float
    constraint_residual: float
    converged: bool
    objective: float
    runtime_s: float
    failed: bool = False
    error: str = ""


GROUPS = ("b1", "b2", "b3", "b4")


def compute_metrics(
    selected: Sequence[str],
    fitted: RsmModel,
    truth: GroundTruthModel,
) -> dict:
    """Selection fractions and coefficient-recovery ratios for one fit.

    real_fraction counts recovered true controls over C; dummy_fraction
    counts selected dummies over D (0 when D = 0).  Ratios are
    beta_true / beta_hat averaged per coefficient group, restricted to
    entries whose true magnitude clears the guard and whose variables were
    selected; guarded-in entries of unselected variables are tallied as
    missing instead.
    """
    s = truth.setting
    selected = tuple(selected)
    sel_set = set(selected)
    true_controls = truth.control_ids
    real_fraction = sum(1 for c in true_controls if c in sel_set) / s.n_control
    dummy_fraction = (
        sum(1 for c in truth.dummy_ids if c in sel_set) / s.n_dummy if s.n_dummy else 0.0
    )

    tm = truth.model
    pos = {c: i for i, c in enumerate(fitted.subset)}
    ratios: dict[str, list[float]] = {g: [] for g in GROUPS}
    missing: dict[str, int] = {g: 0 for g in GROUPS}

    def add(group: str, true_val: float, scale: float, fitted_val: float | None):
        if abs(true_val) <= RATIO_GUARD * scale:
            return
        if fitted_val is None:
            missing[group] += 1
        else:
            ratios[group].append(true_val / fitted_val if fitted_val != 0 else np.inf)

    for i, c in enumerate(true_controls):
        add("b1", tm.beta1[i], s.sigma_b1, fitted.beta1[pos[c]] if c in pos else None)
    for i in range(s.n_control):
        for j in range(i, s.n_control):
            ci, cj = true_controls[i], true_controls[j]
            have = ci in pos and cj in pos
            add("b2", tm.beta2[i, j], s.sigma_b2,
                fitted.beta2[pos[ci], pos[cj]] if have else None)
    for k in range(s.n_noise):
        add("b3", tm.beta3[k], s.sigma_b3, fitted.beta3[k])
    for i, c in enumerate(true_controls):
        for k in range(s.n_noise):
            add("b4", tm.beta4[i, k], s.sigma_b4,
                fitted.beta4[pos[c], k] if c in pos else None)

    ratio_means = {
        g: (float(np.mean(v)) if v else float("nan")) for g, v in ratios.items()
    }
    ratio_counts = {g: len(v) for g, v in ratios.items()}
    return {
        "real_fraction": real_fraction,
        "dummy_fraction": dummy_fraction,
        "ratio_means": ratio_means,
        "ratio_counts": ratio_counts,
        "missing_counts": missing,
    }


@dataclass(frozen=True)
class MethodAggregate:
    method: str
    runs_completed: int
    runs_failed: int
    real_fraction_mean: float
    real_fraction_std: float
    dummy_fraction_mean: float
    dummy_fraction_std: float
    ratio_means: dict[str, float]
    missing_totals: dict[str, int]
    target_gap_true_mean: float
    variance_true_mean: float
    variance_optimum_mean: float
    runtime_mean_s: float


@dataclass(frozen=True)
class MetricsReport:
    setting: ExperimentSetting
    master_seed: int
    records: tuple[ReplicationRecord, ...]
    aggregates: dict[str, MethodAggregate]

    def method_records(self, method: str) -> tuple[ReplicationRecord, ...]:
        return tuple(r for r in self.records if r.method == method and not r.failed)


def _nanmean(values: Iterable[float]) -> float:
    arr = np.array([v for v in values if not np.isnan(v)], dtype=np.float64)
    return float(arr.mean()) if arr.size else float("nan")


def _aggregate(method: str, records: Sequence[ReplicationRecord]) -> MethodAggregate:
    ok = [r for r in records if not r.failed]
    failed = len(records) - len(ok)
    rf = np.array([r.real_fraction for r in ok]) if ok else np.zeros(0)
    df = np.array([r.dummy_fraction for r in ok]) if ok else np.zeros(0)
    return MethodAggregate(
        method=method,
        runs_completed=len(ok),
        runs_failed=failed,
        real_fraction_mean=float(rf.mean()) if rf.size else float("nan"),
        real_fraction_std=float(rf.std(ddof=1)) if rf.size > 1 else 0.0,
        dummy_fraction_mean=float(df.mean()) if df.size else float("nan"),
        dummy_fraction_std=float(df.std(ddof=1)) if df.size > 1 else 0.0,
        ratio_means={g: _nanmean(r.ratio_means[g] for r in ok) for g in GROUPS},
        missing_totals={g: sum(r.missing_counts[g] for r in ok) for g in GROUPS},
        target_gap_true_mean=_nanmean(r.target_gap_true for r in ok),
        variance_true_mean=_nanmean(r.variance_true for r in ok),
        variance_optimum_mean=_nanmean(r.variance_optimum for r in ok),
        runtime_mean_s=_nanmean(r.runtime_s for r in ok),
    )


def _replication_seed(master_seed: int, replication: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(replication)])


def run_replication(
    s: ExperimentSetting,
    methods: Sequence[str],
    master_seed: int,
    replication: int,
    fitness_weights: FitnessWeights = FitnessWeights(),
) -> list[ReplicationRecord]:
    """One replication: fresh truth + data, all methods on the same data."""
    ss = _replication_seed(master_seed, replication)
    truth_seed, sample_seed, search_seed = ss.spawn(3)
    search_int = int(search_seed.generate_state(1)[0] % (2 ** 31))

    truth = generate_ground_truth(s, truth_seed)
    raw = sample_observations(truth, s, sample_seed)
    d = standardize_noise(raw)
    sigma_z = noise_covariance(d)
    bounds = synthetic_bounds(d)
    goal = DesignGoal(Formulation.CONSTRAINED_TARGET, target=truth.target)
    var_opt = true_optimum_variance(truth, bounds, sigma_z)

    records = []
    for method in methods:
        start = time.perf_counter()
        try:
            if method == METHOD_PROPOSED:
                cfg = GaConfig(
                    population=s.ga_pop, generations=s.ga_gens, seed=search_int
                )
                result = ga_search(d, goal, cfg, pool=s.pool_ids,
                                   bounds=bounds, weights=fitness_weights)
                selected = result.selected
                model = result.best_fitness.model
                solution = result.best_fitness.solution
                objective = result.best_fitness.objective
            elif method in (METHOD_MI, METHOD_RF):
                pipe = sequential_pipeline(
                    d, method, s.n_control, goal, bounds=bounds,
                    rf_cfg=RfConfig(seed=search_int), optimizer_seed=search_int,
                )
                selected, model, solution = pipe.selected, pipe.model, pipe.solution
                objective = solution.objective
            else:
                raise ValueError(f"unknown method {method!r}")
        except Exception as exc:  # recorded, never silently dropped
            records.append(ReplicationRecord(
                setting_id=s.id, replication=replication, method=method,
                seed=search_int, selected=(), real_fraction=float("nan"),
                dummy_fraction=float("nan"),
                ratio_means={g: float("nan") for g in GROUPS},
                ratio_counts={g: 0 for g in GROUPS},
                missing_counts={g: 0 for g in GROUPS},
                target_gap_true=float("nan"), variance_true=float("nan"),
                variance_optimum=var_opt, predicted_mean=float("nan"),
                predicted_variance=float("nan"), constraint_residual=float("nan"),
                converged=False, objective=float("nan"),
                runtime_s=time.perf_counter() - start,
                failed=True, error=f"{type(exc).__name__}: {exc}",
            ))
            continue

        metrics = compute_metrics(selected, model, truth)
        # unselected true controls stay at their observed operating level
        subset_pos = {c: i for i, c in enumerate(model.subset)}
        x_true = np.array([
            solution.x_hat[subset_pos[c]] if c in subset_pos
            else float(d.column(c).mean())
            for c in truth.control_ids
        ])
        true_mean = mean_surface(truth.model, x_true)
        true_var = variance_surface(truth.model, x_true, sigma_z)
        records.append(ReplicationRecord(
            setting_id=s.id, replication=replication, method=method,
            seed=search_int, selected=selected,
            real_fraction=metrics["real_fraction"],
            dummy_fraction=metrics["dummy_fraction"],
            ratio_means=metrics["ratio_means"],
            ratio_counts=metrics["ratio_counts"],
            missing_counts=metrics["missing_counts"],
            target_gap_true=abs(true_mean - truth.target),
            variance_true=true_var,
            variance_optimum=var_opt,
            predicted_mean=solution.predicted_mean,
            predicted_variance=solution.predicted_variance,
            constraint_residual=solution.constraint_residual,
            converged=solution.converged,
            objective=objective,
            runtime_s=time.perf_counter() - start,
        ))
    return records


def _run_replication_task(args) -> list[ReplicationRecord]:
    s, methods, master_seed, r, weights = args
    return run_replication(s, methods, master_seed, r, weights)


def run_experiment(
    s: ExperimentSetting,
    methods: Sequence[str] = ALL_METHODS,
    master_seed: int = 0,
    runs: int | None = None,
    jobs: int = 1,
    fitness_weights: FitnessWeights = FitnessWeights(),
) -> MetricsReport:
    """Run all replications of one setting and aggregate the metrics.

    Replication seeds derive from (master_seed, r) only, so shrinking the
    replication count preserves the remaining replications exactly.
    Failed replications are kept in the record list with their error text
    and excluded from aggregates.
    """
    if not methods:
        raise ValueError("methods must be non-empty")
    n_runs = runs if runs is not None else s.runs
    tasks = [(s, tuple(methods), master_seed, r, fitness_weights) for r in range(n_runs)]
    if jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_rep = list(pool.map(_run_replication_task, tasks))
    else:
        per_rep = [_run_replication_task(t) for t in tasks]

    records = tuple(rec for batch in per_rep for rec in batch)
    aggregates = {
        m: _aggregate(m, [r for r in records if r.method == m]) for m in methods
    }
    return MetricsReport(setting=s, master_seed=master_seed, records=records,
                         aggregates=aggregates)


def case_study_dataset(
    seed: int = 0,
    n_obs: int = 214,
    n_real: int = 6,
    n_dummy: int = 4,
    n_noise: int = 6,
    target: float = 65.0,
    sigma_eps: float = 0.5,
) -> tuple[Dataset, GroundTruthModel]:
    """Synthetic stand-in shaped like the tire-compound case data.

    A 10-variable control pool (6 real + 4 dummy), 6 noise variables, and
    214 rows; the intercept is shifted so the true mean at the robust
    setting equals the requested target, and controls are sampled around
    that setting so the optimum sits inside the observational coverage.
    """
    setting = ExperimentSetting(
        id=0, n_control=n_real, n_noise=n_noise, n_dummy=n_dummy, n_obs=n_obs,
        sigma_eps=sigma_eps, sigma_x=2.0, mean_x=0.0, sigma_z=1.0, mean_z=0.0,
        sigma_d=2.0, mean_d=0.0, sigma_b1=1.0, sigma_b2=0.1, sigma_b3=2.0,
        sigma_b4=0.5, runs=1, ga_pop=10, ga_gens=25,
    )
    ss = np.random.SeedSequence([int(seed), 0])
    truth_seed, sample_seed = ss.spawn(2)
    truth = generate_ground_truth(setting, truth_seed)

    # inject the target: shift the intercept so the mean at x_star is `target`
    shifted = RsmModel(
        subset=truth.model.subset, noise_ids=truth.model.noise_ids,
        beta0=truth.model.beta0 + (target - truth.target),
        beta1=truth.model.beta1.copy(), beta2=truth.model.beta2.copy(),
        beta3=truth.model.beta3.copy(), beta4=truth.model.beta4.copy(),
        sigma2=truth.model.sigma2, n_obs=0,
    )
    truth = GroundTruthModel(
        model=shifted, setting=setting, x_star=truth.x_star,
        target=target, degenerate=truth.degenerate,
    )

    # sample controls around the robust setting so it lies in coverage
    rng = np.random.default_rng(sample_seed)
    X = truth.x_star + rng.normal(0.0, setting.sigma_x, size=(n_obs, n_real))
    Z = rng.normal(0.0, setting.sigma_z, size=(n_obs, n_noise))
    D = rng.normal(0.0, setting.sigma_d, size=(n_obs, n_dummy))
    eps = rng.normal(0.0, sigma_eps, size=n_obs)
    y = shifted.predict(X, Z) + eps

    names = setting.control_ids + setting.dummy_ids + setting.noise_ids + ("y",)
    values = np.column_stack([X, D, Z, y])
    roles: dict[str, VariableRole] = {}
    for c in setting.control_ids + setting.dummy_ids:
        roles[c] = VariableRole.CONTROL
    for z in setting.noise_ids:
        roles[z] = VariableRole.NOISE
    roles["y"] = VariableRole.RESPONSE
    return Dataset(names=names, values=values, roles=roles), truth
