"""Download-log ingestion, anonymisation and synthetic data generation.

The canonical on-disk format is a long-form CSV with header
``customer_id,date,ftd``.  Every customer is materialised as a contiguous
daily series between its first and last listed date; unlisted days inside
that range count as zero downloads.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

import numpy as np

CSV_HEADER = ("customer_id", "date", "ftd")
DEFAULT_WEEKLY_PROFILE = (1.0, 1.0, 1.05, 1.0, 0.85, 0.5, 0.6)
DEFAULT_DIP_WEEKS = (1, 31, 32, 33, 34, 35, 51, 52)


class DataError(ValueError):
    """Raised for malformed or semantically invalid download data."""


class ParseError(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateKeyError(DataError):
    pass


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DownloadSeries:
    """Daily download counts for one customer starting at ``start_date``."""

    customer_id: str
    start_date: dt.date
    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise DataError(f"{self.customer_id}: counts must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise DataError(f"{self.customer_id}: counts must be finite and non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.counts) - 1)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other):
        if not isinstance(other, DownloadSeries):
            return NotImplemented
        return (
            self.customer_id == other.customer_id
            and self.start_date == other.start_date
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True)
class RawDataset:
    series: Mapping[str, DownloadSeries]
    observation_end: dt.date | None = None

    def __post_init__(self):
        ordered = {cid: self.series[cid] for cid in sorted(self.series)}
        for cid, s in ordered.items():
            if s.customer_id != cid:
                raise DataError(f"series keyed {cid!r} carries id {s.customer_id!r}")
        end = self.observation_end
        latest = max((s.end_date for s in ordered.values()), default=None)
        if end is None:
            end = latest
        elif latest is not None and latest > end:
            raise DataError(f"observation_end {end} precedes last series date {latest}")
        object.__setattr__(self, "series", ordered)
        object.__setattr__(self, "observation_end", end)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series.values())

    @classmethod
    def from_series(cls, series: Iterable[DownloadSeries], observation_end=None) -> "RawDataset":
        mapping: dict[str, DownloadSeries] = {}
        for s in series:
            if s.customer_id in mapping:
                raise DuplicateKeyError(f"duplicate customer_id {s.customer_id!r}")
            mapping[s.customer_id] = s
        return cls(mapping, observation_end)


def parse_long_csv(stream: TextIO | str) -> RawDataset:
    """Parse a ``customer_id,date,ftd`` CSV into gap-filled series."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "missing header") from None
    header = [h.strip().lstrip("\ufeff") for h in header]
    if tuple(header) != CSV_HEADER:
        raise ParseError(1, f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")

    rows: dict[str, dict[dt.date, float]] = {}
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise ParseError(line, f"expected 3 fields, got {len(row)}")
        cid, date_text, ftd_text = (field_.strip() for field_ in row)
        if not cid:
            raise ParseError(line, "empty customer_id")
        try:
            day = dt.date.fromisoformat(date_text)
        except ValueError:
            raise ParseError(line, f"invalid ISO date {date_text!r}") from None
        try:
            ftd = float(ftd_text)
        except ValueError:
            raise ParseError(line, f"invalid ftd value {ftd_text!r}") from None
        if not math.isfinite(ftd):
            raise ParseError(line, f"non-finite ftd value {ftd_text!r}")
        if ftd < 0:
            raise DataError(f"line {line}: negative ftd {ftd_text!r}")
        per_customer = rows.setdefault(cid, {})
        if day in per_customer:
            raise DuplicateKeyError(f"line {line}: duplicate entry for ({cid}, {day.isoformat()})")
        per_customer[day] = ftd

    series = []
    for cid, by_day in rows.items():
        start = min(by_day)
        length = (max(by_day) - start).days + 1
        counts = np.zeros(length)
        for day, value in by_day.items():
            counts[(day - start).days] = value
        series.append(DownloadSeries(cid, start, counts))
    return RawDataset.from_series(series)


def read_long_csv(path) -> RawDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_long_csv(fh)


def _format_count(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_long_csv(dataset: RawDataset, stream: TextIO) -> None:
    """Write every materialised day, zeros included, so re-parsing is lossless."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in dataset:
        for offset, value in enumerate(s.counts):
            day = s.start_date + dt.timedelta(days=offset)
            writer.writerow((s.customer_id, day.isoformat(), _format_count(value)))


def anonymize(series: DownloadSeries, jitter_epsilon: float = 0.001, seed: int = 0) -> DownloadSeries:
    """Rescale so the peak day equals 1.0, then add uniform jitter in [0, eps]."""
    if jitter_epsilon < 0:
        raise DataError("jitter_epsilon must be non-negative")
    peak = series.counts.max()
    if peak <= 0:
        raise DataError(f"{series.customer_id}: cannot anonymise an all-zero series")
    scaled = series.counts / peak
    if jitter_epsilon > 0:
        rng = np.random.default_rng(seed)
        scaled = scaled + rng.uniform(0.0, jitter_epsilon, size=scaled.shape)
    return DownloadSeries(series.customer_id, series.start_date, scaled)


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 1000
    churn_fraction: float = 0.45
    horizon_days: int = 1460
    start_date: dt.date = dt.date(2015, 1, 5)
    size_mu: float = 1.5
    size_sigma: float = 1.0
    weekly_profile: tuple[float, ...] = DEFAULT_WEEKLY_PROFILE
    annual_dip_weeks: tuple[int, ...] = DEFAULT_DIP_WEEKS
    annual_dip_multiplier: float = 0.5
    churn_decay_days: int = 120
    # churn dates fall in the last churn_window_days before the final churn_margin_days
    churn_window_days: int = 365
    churn_margin_days: int = 30
    churner_rate_multiplier: float = 1.0
    noise_dispersion: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weekly_profile", tuple(float(v) for v in self.weekly_profile))
        object.__setattr__(self, "annual_dip_weeks", tuple(sorted({int(w) for w in self.annual_dip_weeks})))
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.n_customers < 1:
            problems.append("n_customers must be positive")
        if not 0.0 <= self.churn_fraction <= 1.0:
            problems.append("churn_fraction must lie in [0, 1]")
        if self.horizon_days < 1:
            problems.append("horizon_days must be positive")
        if self.size_sigma < 0:
            problems.append("size_sigma must be non-negative")
        wp = self.weekly_profile
        if len(wp) != 7 or any(v < 0 or not math.isfinite(v) for v in wp) or not any(v > 0 for v in wp):
            problems.append("weekly_profile needs 7 non-negative entries with at least one positive")
        if any(not 1 <= w <= 53 for w in self.annual_dip_weeks):
            problems.append("annual_dip_weeks must be ISO week numbers 1..53")
        if self.annual_dip_multiplier < 0:
            problems.append("annual_dip_multiplier must be non-negative")
        if not 1 <= self.churn_decay_days < self.horizon_days:
            problems.append("churn_decay_days must satisfy 1 <= churn_decay_days < horizon_days")
        if self.churn_window_days < 1 or self.churn_margin_days < 0:
            problems.append("churn_window_days must be positive and churn_margin_days non-negative")
        if self.churn_fraction > 0 and self.churn_margin_days >= self.horizon_days - 1:
            problems.append("churn_margin_days leaves no room for churn dates")
        if self.churner_rate_multiplier <= 0:
            problems.append("churner_rate_multiplier must be positive")
        if self.noise_dispersion <= 0:
            problems.append("noise_dispersion must be positive")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class SyntheticData:
    dataset: RawDataset
    churn_dates: dict[str, dt.date | None] = field(default_factory=dict)


def _customer_ids(n: int) -> list[str]:
    width = max(4, len(str(n - 1)))
    return [f"C{i:0{width}d}" for i in range(n)]


def seasonal_multipliers(config: SynthConfig) -> np.ndarray:
    days = [config.start_date + dt.timedelta(days=d) for d in range(config.horizon_days)]
    weekly = np.array([config.weekly_profile[d.weekday()] for d in days])
    dips = set(config.annual_dip_weeks)
    annual = np.array([config.annual_dip_multiplier if d.isocalendar()[1] in dips else 1.0 for d in days])
    return weekly * annual


def generate_synthetic(config: SynthConfig) -> SyntheticData:
    """Seasonal gamma-Poisson download counts with planted churn decay.

    Returns the dataset plus a map customer_id -> churn date (the first day
    with a guaranteed zero rate) or None for customers that never churn.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n, horizon = config.n_customers, config.horizon_days
    ids = _customer_ids(n)

    base = rng.lognormal(config.size_mu, config.size_sigma, size=n)
    n_churn = int(round(config.churn_fraction * n))
    churners = np.zeros(n, dtype=bool)
    churners[rng.permutation(n)[:n_churn]] = True
    base[churners] *= config.churner_rate_multiplier

    upper = horizon - config.churn_margin_days
    lower = max(1, upper - config.churn_window_days)
    churn_index = np.full(n, -1)
    churn_index[churners] = rng.integers(lower, upper, size=n_churn, endpoint=True)

    rate = base[:, None] * seasonal_multipliers(config)[None, :]
    day = np.arange(horizon)[None, :]
    c = churn_index[:, None]
    decay = np.clip((c - day) / config.churn_decay_days, 0.0, 1.0)
    rate = np.where(churners[:, None], rate * decay, rate)

    shape = 1.0 / config.noise_dispersion
    mixed = rng.gamma(shape, 1.0 / shape, size=rate.shape) * rate
    counts = rng.poisson(mixed).astype(np.float64)

    series = [DownloadSeries(cid, config.start_date, counts[i]) for i, cid in enumerate(ids)]
    end = config.start_date + dt.timedelta(days=horizon - 1)
    truth = {
        cid: (config.start_date + dt.timedelta(days=int(churn_index[i])) if churners[i] else None)
        for i, cid in enumerate(ids)
    }
    return SyntheticData(RawDataset.from_series(series, end), truth)


def write_ground_truth_csv(churn_dates: Mapping[str, dt.date | None], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("customer_id", "churn_date"))
    for cid in sorted(churn_dates):
        day = churn_dates[cid]
        writer.writerow((cid, day.isoformat() if day else ""))


def read_ground_truth_csv(stream: TextIO) -> dict[str, dt.date | None]:
    reader = csv.DictReader(stream)
    return {
        row["customer_id"]: (dt.date.fromisoformat(row["churn_date"]) if row["churn_date"] else None)
        for row in reader
    }
