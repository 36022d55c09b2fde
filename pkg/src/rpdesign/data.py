"""Observational dataset loading, validation, roles, and standardization.

A :class:`Dataset` is an immutable table of named numeric columns, each
tagged as a control, noise, or response variable.  Noise columns can be
centered to zero mean (the variance model assumes zero-mean noise), and
the centering record travels with the dataset so the operation is
idempotent and reversible for reporting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Base class for dataset loading/validation failures."""


class MissingColumnError(DataError):
    pass


class DuplicateColumnError(DataError):
    pass


class NonNumericValueError(DataError):
    pass


class MissingValueError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class SchemaError(DataError):
    """Role map violates the one-response / has-control / has-noise rule."""


class VariableRole(Enum):
    CONTROL = "control"
    NOISE = "noise"
    RESPONSE = "response"


_MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "none"}


@dataclass(frozen=True)
class NoiseScaling:
    """Per-noise-column centering record: value_stored = (raw - mean) / scale."""

    mean: float
    scale: float = 1.0
    constant: bool = False


@dataclass(frozen=True)
class Dataset:
    names: tuple[str, ...]
    values: np.ndarray  # (n, len(names)) float64, write-protected
    roles: Mapping[str, VariableRole]
    standardization: Mapping[str, NoiseScaling] | None = None

    def __post_init__(self):
        self.values.setflags(write=False)
        roles = dict(self.roles)
        if set(roles) != set(self.names):
            raise SchemaError("role map must cover exactly the dataset columns")
        n_resp = sum(1 for r in roles.values() if r is VariableRole.RESPONSE)
        if n_resp != 1:
            raise SchemaError(f"expected exactly one response column, found {n_resp}")
        if not any(r is VariableRole.CONTROL for r in roles.values()):
            raise SchemaError("dataset needs at least one control column")
        if not any(r is VariableRole.NOISE for r in roles.values()):
            raise SchemaError("dataset needs at least one noise column")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise SchemaError("values shape does not match column names")
        if self.n < 1:
            raise EmptyDatasetError("dataset has zero rows")
        if not np.all(np.isfinite(self.values)):
            raise MissingValueError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def control_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.names if self.roles[c] is VariableRole.CONTROL)

    @property
    def noise_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.names if self.roles[c] is VariableRole.NOISE)

    @property
    def response_name(self) -> str:
        return next(c for c in self.names if self.roles[c] is VariableRole.RESPONSE)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise MissingColumnError(f"no column named {name!r}") from None
        return self.values[:, j]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        cols = [self.names.index(c) for c in names]
        return self.values[:, cols]

    @property
    def response(self) -> np.ndarray:
        return self.column(self.response_name)

    def write_csv(self, path: str | Path) -> None:
        """Write the table back out; floats use shortest round-trip repr."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


def _parse_cell(raw: str, row: int, column: str) -> float:
    text = raw.strip()
    if text.lower() in _MISSING_TOKENS:
        raise MissingValueError(f"missing value at row {row}, column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise NonNumericValueError(
            f"non-numeric value {raw!r} at row {row}, column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise MissingValueError(f"non-finite value {raw!r} at row {row}, column {column!r}")
    return value


def load_dataset(source: str | Path, schema: Mapping[str, VariableRole | str]) -> Dataset:
    """Load a comma-separated file with header row into a Dataset.

    ``schema`` maps column name -> role ("control" / "noise" / "response").
    File columns absent from the schema are ignored.  Rows are 1-based in
    error messages (the header is row 0).
    """
    roles = {c: (r if isinstance(r, VariableRole) else VariableRole(str(r).lower()))
             for c, r in schema.items()}

    with open(source, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{source}: file is empty") from None
        header = [h.strip() for h in header]
        seen = set()
        for h in header:
            if h in seen:
                raise DuplicateColumnError(f"duplicate column name {h!r} in header")
            seen.add(h)
        for c in roles:
            if c not in seen:
                raise MissingColumnError(f"schema column {c!r} not present in file")

        positions = {c: header.index(c) for c in roles}
        names = tuple(c for c in header if c in roles)
        rows: list[list[float]] = []
        for i, raw_row in enumerate(reader, start=1):
            if not raw_row or all(not cell.strip() for cell in raw_row):
                continue
            if len(raw_row) < len(header):
                raise MissingValueError(f"row {i} has {len(raw_row)} cells, expected {len(header)}")
            rows.append([_parse_cell(raw_row[positions[c]], i, c) for c in names])

    if not rows:
        raise EmptyDatasetError(f"{source}: no data rows")
    values = np.asarray(rows, dtype=np.float64)
    return Dataset(names=names, values=values, roles={c: roles[c] for c in names})


def standardize_noise(d: Dataset, unit_variance: bool = False) -> Dataset:
    """Center every noise column to zero mean; optionally scale to unit variance.

    The per-column (mean, scale) record is stored on the returned dataset.
    A dataset that already carries a record is returned unchanged, which
    makes the operation idempotent on both values and record.  Constant
    noise columns center to all-zero and are flagged.
    """
    if d.standardization is not None:
        return d
    noise = d.noise_names
    if not noise:
        raise SchemaError("dataset has no noise columns to standardize")
    values = d.values.copy()
    record: dict[str, NoiseScaling] = {}
    for name in noise:
        j = d.names.index(name)
        col = values[:, j]
        mean = float(col.mean())
        centered = col - mean
        constant = bool(np.all(centered == 0.0))
        scale = 1.0
        if unit_variance and not constant:
            scale = float(centered.std(ddof=1)) if d.n > 1 else 1.0
            if scale == 0.0:
                scale = 1.0
            centered = centered / scale
        values[:, j] = centered
        record[name] = NoiseScaling(mean=mean, scale=scale, constant=constant)
    return Dataset(names=d.names, values=values, roles=dict(d.roles), standardization=record)


def noise_covariance(d: Dataset) -> np.ndarray:
    """Sample covariance (n-1 denominator) of the noise columns, symmetrized."""
    if d.n < 2:
        raise DataError("noise covariance needs at least 2 observations")
    z = d.matrix(d.noise_names)
    cov = np.atleast_2d(np.cov(z, rowvar=False, ddof=1))
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    membership: np.ndarray  # (n,) int fold index in [0, k)

    def __post_init__(self):
        self.membership.setflags(write=False)

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.membership == fold)[0]


def split_folds(d: Dataset, k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle + round-robin assignment; fold sizes differ by <= 1."""
    n = d.n
    if not 2 <= k <= n:
        raise DataError(f"fold count k={k} out of range [2, {n}]")
    perm = np.random.default_rng(seed).permutation(n)
    membership = np.empty(n, dtype=np.int64)
    membership[perm] = np.arange(n) % k
    return FoldAssignment(k=k, membership=membership)


@dataclass(frozen=True)
class Bounds:
    """Per-control-variable box [low, high], plus start-point quantiles.

    Derived bounds always contain every observed value of the column, which
    restricts optimization to the coverage region of the observational data.
    """

    lows: Mapping[str, float]
    highs: Mapping[str, float]
    quantiles: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.lows:
            lo, hi = self.lows[name], self.highs[name]
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DataError(f"bounds for {name!r} must be finite")
            if lo > hi:
                raise DataError(f"bounds for {name!r} have low > high")

    def arrays(self, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        try:
            lo = np.array([self.lows[c] for c in names], dtype=np.float64)
            hi = np.array([self.highs[c] for c in names], dtype=np.float64)
        except KeyError as exc:
            raise DataError(f"no bounds for control column {exc.args[0]!r}") from None
        return lo, hi

    def start_lattice(self, names: Sequence[str]) -> list[np.ndarray]:
        """Deterministic optimizer start points from the stored quantiles."""
        qs = []
        for c in names:
            q = self.quantiles.get(c)
            if not q:
                lo, hi = self.lows[c], self.highs[c]
                q = (lo + 0.25 * (hi - lo), 0.5 * (lo + hi), lo + 0.75 * (hi - lo))
            qs.append(q)
        mids = np.array([q[len(q) // 2] for q in qs], dtype=np.float64)
        starts = [mids]
        if names:
            lo25 = np.array([q[0] for q in qs])
            hi75 = np.array([q[-1] for q in qs])
            if len(names) <= 4:
                for mask in range(2 ** len(names)):
                    pt = np.where(
                        [(mask >> i) & 1 for i in range(len(names))], hi75, lo25
                    ).astype(np.float64)
                    starts.append(pt)
            else:
                starts.extend([lo25, hi75])
        return starts


def derive_bounds(d: Dataset, names: Sequence[str] | None = None) -> Bounds:
    """Observed per-column [min, max] plus quartile anchors for multistart."""
    names = tuple(names) if names is not None else d.control_names
    lows, highs, quantiles = {}, {}, {}
    for c in names:
        col = d.column(c)
        lows[c] = float(col.min())
        highs[c] = float(col.max())
        quantiles[c] = tuple(float(v) for v in np.quantile(col, (0.25, 0.5, 0.75)))
    return Bounds(lows=lows, highs=highs, quantiles=quantiles)


def condition_warning(d: Dataset) -> float | None:
    """Condition number of the [controls | noise] column block, if alarming.

    Observational control columns can be collinear with noise columns; the
    fit then hides the split between transmitted and controllable effects.
    Returns the condition estimate when it exceeds 1e6, else None.
    """
    block = np.column_stack([d.matrix(d.control_names), d.matrix(d.noise_names)])
    block = block - block.mean(axis=0)
    sv = np.linalg.svd(block, compute_uv=False)
    if sv[-1] <= 0:
        return float("inf")
    cond = float(sv[0] / sv[-1])
    return cond if cond > 1e6 else None
