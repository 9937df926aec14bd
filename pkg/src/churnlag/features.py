"""Fixed-width feature matrices: lag truncation, windowing, block sums.

Pipeline order per customer is fixed: drop the most recent ``lag_days``,
keep the trailing ``window_days`` (zero left-padded), then either sum
right-aligned blocks of ``resample_days`` or take a trailing moving average.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import TextIO

import numpy as np

from .labeling import LabeledDataset

DOWNSAMPLE = "downsample"
MOVING_AVERAGE = "moving_average"
MODES = (DOWNSAMPLE, MOVING_AVERAGE)
DEGENERATE_STD = 1e-12


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    window_days: int = 540
    resample_days: int = 1
    lag_days: int = 0
    mode: str = DOWNSAMPLE
    ma_window: int = 7

    def __post_init__(self):
        if self.mode not in MODES:
            raise FeatureError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.window_days < 1:
            raise FeatureError("window_days must be positive")
        if self.resample_days < 1:
            raise FeatureError("resample_days must be >= 1")
        if self.lag_days < 0:
            raise FeatureError("lag_days must be >= 0")
        if self.ma_window < 1:
            raise FeatureError("ma_window must be >= 1")

    @property
    def width(self) -> int:
        if self.mode == DOWNSAMPLE:
            return self.window_days // self.resample_days
        return self.window_days - self.ma_window + 1

    def with_axis(self, value: int, lag: int) -> "FeatureConfig":
        """Config for one grid cell; ``value`` is the block size or MA window."""
        if self.mode == DOWNSAMPLE:
            return replace(self, resample_days=value, lag_days=lag)
        return replace(self, ma_window=value, lag_days=lag)


def lag_truncate(counts, n: int) -> np.ndarray:
    if n < 0:
        raise FeatureError("lag must be >= 0")
    counts = np.asarray(counts, dtype=np.float64)
    return counts[: max(len(counts) - n, 0)]


def resample(counts, block: int) -> np.ndarray:
    """Sums of consecutive right-aligned blocks; a leading partial block is dropped."""
    if block < 1:
        raise FeatureError("resample block must be >= 1")
    counts = np.asarray(counts, dtype=np.float64)
    if block == 1:
        return counts.copy()
    k = len(counts) // block
    tail = counts[len(counts) - k * block:]
    return tail.reshape(k, block).sum(axis=1)


def moving_average(counts, window: int) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    if window < 1:
        raise FeatureError("moving-average window must be >= 1")
    if window > len(counts):
        raise FeatureError(f"moving-average window {window} exceeds series length {len(counts)}")
    if window == 1:
        return counts.copy()
    return np.lib.stride_tricks.sliding_window_view(counts, window).mean(axis=1)


def trailing_window(counts, window: int) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    if len(counts) >= window:
        return counts[len(counts) - window:]
    return np.concatenate([np.zeros(window - len(counts)), counts])


def featurize(counts, config: FeatureConfig) -> np.ndarray:
    windowed = trailing_window(lag_truncate(counts, config.lag_days), config.window_days)
    if config.mode == DOWNSAMPLE:
        return resample(windowed, config.resample_days)
    return moving_average(windowed, config.ma_window)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        return self.std < DEGENERATE_STD

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scale = np.where(self.degenerate, 1.0, self.std)
        return (X - self.mean) / scale


def fit_standardizer(X) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FeatureError("standardizer needs a non-empty 2-D matrix")
    return Standardizer(X.mean(axis=0), X.std(axis=0))


def apply_standardizer(X, params: Standardizer) -> np.ndarray:
    return params.transform(X)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    customer_ids: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    config: FeatureConfig
    standardization: Standardizer | None = field(default=None)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != len(self.y) or len(self.y) != len(self.customer_ids):
            raise FeatureError("rows, labels and ids must agree in length")
        if not np.all(np.isfinite(self.X)):
            raise FeatureError("feature matrix contains non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def standardized(self, params: Standardizer) -> "FeatureMatrix":
        return FeatureMatrix(self.customer_ids, params.transform(self.X), self.y, self.config, params)


def build_matrix(dataset: LabeledDataset, config: FeatureConfig) -> FeatureMatrix:
    if len(dataset) == 0:
        raise FeatureError("cannot build features from an empty dataset")
    if config.width < 1:
        raise FeatureError(
            f"configuration yields zero features (window={config.window_days}, "
            f"resample={config.resample_days}, ma_window={config.ma_window})"
        )
    entries = sorted(dataset.entries, key=lambda e: e.customer_id)
    X = np.empty((len(entries), config.width))
    for i, e in enumerate(entries):
        X[i] = featurize(e.counts, config)
    y = np.array([e.label.sign for e in entries], dtype=np.int64)
    return FeatureMatrix(tuple(e.customer_id for e in entries), X, y, config)


def write_feature_csv(matrix: FeatureMatrix, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["customer_id", "label"] + [f"f{j}" for j in range(matrix.X.shape[1])])
    for cid, label, row in zip(matrix.customer_ids, matrix.y, matrix.X):
        writer.writerow([cid, int(label)] + [repr(float(v)) for v in row])
