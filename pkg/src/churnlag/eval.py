"""Cross-validation, the resample x lag grid sweep, and population statistics."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy.stats import mannwhitneyu

from . import models
from .features import DOWNSAMPLE, MODES, FeatureConfig, FeatureError, build_matrix, fit_standardizer
from .labeling import ActivityLabel, LabeledDataset
from .models import ClassifierSpec

log = logging.getLogger(__name__)

DEFAULT_RESAMPLE_RANGE = tuple(range(1, 31))
DEFAULT_LAG_MAX = 365


class StratificationError(ValueError):
    pass


class CellError(RuntimeError):
    def __init__(self, value: int, lag: int, family: str, cause: Exception):
        super().__init__(f"cell (resample={value}, lag={lag}, family={family}): {type(cause).__name__}: {cause}")
        self.value, self.lag, self.family = value, lag, family


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into k folds with per-class counts differing by at most one."""
    labels = np.asarray(labels)
    if k < 2:
        raise StratificationError("k must be >= 2")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    start = 0
    for cls in (1, -1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise StratificationError(f"class {cls:+d} has {len(idx)} members, fewer than k={k}")
        for j, i in enumerate(rng.permutation(idx)):
            buckets[(start + j) % k].append(int(i))
        # continue the round-robin so total fold sizes also stay balanced
        start = (start + len(idx)) % k
    if len(labels) != sum(len(b) for b in buckets):
        raise StratificationError("labels must all be +1 or -1")
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _cell_seeds(seed: int, value: int, lag: int, family: str, k: int) -> tuple[int, list[int]]:
    ss = np.random.SeedSequence([seed, value, lag, ClassifierSpec(family).family_key])
    state = ss.generate_state(k + 1)
    return int(state[0]), [int(s) for s in state[1:]]


def fold_predictions(X, y, spec: ClassifierSpec, folds: Sequence[np.ndarray], model_seeds: Sequence[int]):
    """Fit on each fold's complement and predict the held-out rows.

    Everything learned from data (scaler and model) sees training rows only.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    out = []
    all_idx = np.arange(len(y))
    for fold, model_seed in zip(folds, model_seeds):
        train = np.setdiff1d(all_idx, fold, assume_unique=True)
        X_train, X_test = X[train], X[fold]
        if spec.family in models.NEEDS_SCALING:
            scaler = fit_standardizer(X_train)
            X_train, X_test = scaler.transform(X_train), scaler.transform(X_test)
        model = models.fit(spec.with_seed(model_seed), X_train, y[train])
        out.append(models.predict(model, X_test))
    return out


def cross_validate(X, y, spec: ClassifierSpec, k: int, fold_seed: int, model_seeds: Sequence[int]) -> list[float]:
    folds = stratified_kfold(y, k, fold_seed)
    preds = fold_predictions(X, y, spec, folds, model_seeds)
    y = np.asarray(y)
    return [float(np.mean(p == y[f])) for p, f in zip(preds, folds)]


def _axis_value(config: FeatureConfig) -> int:
    return config.resample_days if config.mode == DOWNSAMPLE else config.ma_window


def evaluate_cell(dataset: LabeledDataset, config: FeatureConfig, spec: ClassifierSpec, k: int = 5,
                  seed: int = 0, matrix=None) -> list[float]:
    """Per-fold held-out accuracies for one (resample/window, lag, family) cell."""
    value = _axis_value(config)
    try:
        if matrix is None:
            matrix = build_matrix(dataset, config)
        fold_seed, model_seeds = _cell_seeds(seed, value, config.lag_days, spec.family, k)
        return cross_validate(matrix.X, matrix.y, spec, k, fold_seed, model_seeds)
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        raise CellError(value, config.lag_days, spec.family, exc) from exc


@dataclass(frozen=True)
class GridSpec:
    resample_range: tuple[int, ...] = DEFAULT_RESAMPLE_RANGE
    lag_range: tuple[int, ...] | None = None
    lag_stride: int = 5
    families: tuple[ClassifierSpec, ...] = (ClassifierSpec("random_forest"),)
    folds: int = 5
    seed: int = 0
    mode: str = DOWNSAMPLE
    window_days: int = 540

    def __post_init__(self):
        if self.lag_stride < 1:
            raise ValueError("lag_stride must be >= 1")
        lags = self.lag_range
        if lags is None:
            lags = range(0, DEFAULT_LAG_MAX + 1, self.lag_stride)
        object.__setattr__(self, "lag_range", tuple(int(n) for n in lags))
        object.__setattr__(self, "resample_range", tuple(int(v) for v in self.resample_range))
        fams = tuple(f if isinstance(f, ClassifierSpec) else ClassifierSpec(f) for f in self.families)
        object.__setattr__(self, "families", fams)
        if not self.resample_range or not self.lag_range or not self.families:
            raise ValueError("grid ranges and family list must be non-empty")
        if any(v < 1 for v in self.resample_range) or any(n < 0 for n in self.lag_range):
            raise ValueError("resample values must be >= 1 and lags >= 0")
        if len({f.family for f in self.families}) != len(self.families):
            raise ValueError("families must be distinct")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def feature_config(self, value: int, lag: int) -> FeatureConfig:
        base = FeatureConfig(window_days=self.window_days, mode=self.mode)
        return base.with_axis(value, lag)


@dataclass(frozen=True)
class GridCell:
    mode: str
    value: int
    lag: int
    family: str
    fold_accuracies: tuple[float, ...]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else math.nan

    @property
    def std(self) -> float:
        # sample spread across folds
        if len(self.fold_accuracies) < 2:
            return math.nan
        return float(np.std(self.fold_accuracies, ddof=1))


@dataclass(frozen=True)
class GridResult:
    cells: tuple[GridCell, ...]
    grid: GridSpec | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def failed(self) -> list[GridCell]:
        return [c for c in self.cells if not c.ok]

    def lookup(self, value: int, lag: int, family: str) -> GridCell:
        for c in self.cells:
            if (c.value, c.lag, c.family) == (value, lag, family):
                return c
        raise KeyError((value, lag, family))


def _run_point(dataset: LabeledDataset, grid: GridSpec, value: int, lag: int) -> list[GridCell]:
    config = None
    matrix = None
    build_error = None
    try:
        config = grid.feature_config(value, lag)
        matrix = build_matrix(dataset, config)
    except (FeatureError, ValueError) as exc:
        build_error = f"{type(exc).__name__}: {exc}"
    cells = []
    for spec in grid.families:
        if build_error is not None:
            cells.append(GridCell(grid.mode, value, lag, spec.family, (), build_error))
            continue
        try:
            accs = evaluate_cell(dataset, config, spec, grid.folds, grid.seed, matrix=matrix)
            cells.append(GridCell(grid.mode, value, lag, spec.family, tuple(accs)))
        except CellError as exc:
            log.warning("%s", exc)
            cells.append(GridCell(grid.mode, value, lag, spec.family, (), str(exc)))
    return cells


def run_grid(dataset: LabeledDataset, grid: GridSpec, jobs: int = 1) -> GridResult:
    """Evaluate every (resample value, lag, family) cell.

    Cell seeds depend only on the global seed and the cell coordinates, so the
    result is identical for any ``jobs`` setting and execution order.
    """
    labels = dataset.labels
    minority = min(np.sum(labels == 1), np.sum(labels == -1))
    if grid.folds > minority:
        raise StratificationError(f"folds={grid.folds} exceeds minority class size {minority}")
    points = [(v, n) for v in grid.resample_range for n in grid.lag_range]
    if jobs == 1 or len(points) == 1:
        chunks = [_run_point(dataset, grid, v, n) for v, n in points]
    else:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=jobs)(delayed(_run_point)(dataset, grid, v, n) for v, n in points)
    order = {spec.family: i for i, spec in enumerate(grid.families)}
    cells = sorted((c for chunk in chunks for c in chunk), key=lambda c: (c.value, c.lag, order[c.family]))
    return GridResult(tuple(cells), grid)


def best_cells(result: GridResult) -> list[GridCell]:
    """Successful cells by mean accuracy, ties to smaller lag then smaller resample."""
    if not result.cells:
        raise ValueError("empty grid result")
    return sorted((c for c in result.cells if c.ok), key=lambda c: (-c.mean, c.lag, c.value))


def cut(result: GridResult, family: str, *, value: int | None = None, lag: int | None = None):
    """Accuracy along one axis with the other held fixed.

    Returns (axis values, means, stds); with ``lag`` fixed the axis is the
    resample value, with ``value`` fixed it is the lag.
    """
    if (value is None) == (lag is None):
        raise ValueError("fix exactly one of value= or lag=")
    if lag is not None:
        chosen = [c for c in result.cells if c.family == family and c.lag == lag]
        xs = [c.value for c in chosen]
    else:
        chosen = [c for c in result.cells if c.family == family and c.value == value]
        xs = [c.lag for c in chosen]
    order = np.argsort(xs, kind="stable")
    return (
        np.array(xs)[order],
        np.array([chosen[i].mean for i in order]),
        np.array([chosen[i].std for i in order]),
    )


def write_grid_csvs(result: GridResult, long_stream: TextIO, summary_stream: TextIO) -> None:
    long_w = csv.writer(long_stream, lineterminator="\n")
    long_w.writerow(("mode", "resample", "lag", "family", "fold", "accuracy"))
    summ_w = csv.writer(summary_stream, lineterminator="\n")
    summ_w.writerow(("mode", "resample", "lag", "family", "mean", "std"))
    for c in result.cells:
        for i, acc in enumerate(c.fold_accuracies):
            long_w.writerow((c.mode, c.value, c.lag, c.family, i, repr(acc)))
        summ_w.writerow((c.mode, c.value, c.lag, c.family, repr(c.mean), repr(c.std)))


@dataclass(frozen=True)
class PopulationStats:
    bin_edges: np.ndarray
    active_histogram: np.ndarray
    inactive_histogram: np.ndarray
    active_median: float
    inactive_median: float
    overlap_coefficient: float
    u_statistic: float
    p_value: float
    n_active_days: int
    n_inactive_days: int

    @property
    def medians(self) -> tuple[float, float]:
        return self.active_median, self.inactive_median

    def to_report(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "active_mass": self.active_histogram.tolist(),
            "inactive_mass": self.inactive_histogram.tolist(),
            "active_median": self.active_median,
            "inactive_median": self.inactive_median,
            "overlap_coefficient": self.overlap_coefficient,
            "mann_whitney_u": self.u_statistic,
            "p_value": self.p_value,
            "n_active_days": self.n_active_days,
            "n_inactive_days": self.n_inactive_days,
        }


def log_bins(lo: float, hi: float, bins: int) -> np.ndarray:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if hi <= lo:
        hi = lo * 2.0
    return np.geomspace(lo, hi, bins + 1)


def compare_samples(active, inactive, bins: int = 40) -> PopulationStats:
    """Compare two pools of positive daily counts on shared log-spaced bins."""
    a = np.asarray(active, dtype=np.float64)
    b = np.asarray(inactive, dtype=np.float64)
    a, b = a[a > 0], b[b > 0]
    if a.size == 0 or b.size == 0:
        raise ValueError("both populations need at least one day with downloads")
    edges = log_bins(min(a.min(), b.min()), max(a.max(), b.max()), bins)
    ha = np.histogram(a, edges)[0] / a.size
    hb = np.histogram(b, edges)[0] / b.size
    u, p = mannwhitneyu(a, b, alternative="two-sided")
    return PopulationStats(
        bin_edges=edges,
        active_histogram=ha,
        inactive_histogram=hb,
        active_median=float(np.median(a)),
        inactive_median=float(np.median(b)),
        overlap_coefficient=float(np.minimum(ha, hb).sum()),
        u_statistic=float(u),
        p_value=float(p),
        n_active_days=int(a.size),
        n_inactive_days=int(b.size),
    )


def compare_populations(dataset: LabeledDataset, bins: int = 40) -> PopulationStats:
    pools = {ActivityLabel.ACTIVE: [], ActivityLabel.INACTIVE: []}
    for e in dataset.entries:
        pools[e.label].append(e.counts[e.counts > 0])
    for label, chunks in pools.items():
        if not chunks or sum(c.size for c in chunks) == 0:
            raise ValueError(f"no {label.name.lower()} customer has any download day")
    return compare_samples(
        np.concatenate(pools[ActivityLabel.ACTIVE]), np.concatenate(pools[ActivityLabel.INACTIVE]), bins
    )
