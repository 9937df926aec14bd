"""Active / Inactive labelling and last-download alignment."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .dataset import DataError, DownloadSeries, RawDataset

DEFAULT_GAP_DAYS = 30


class ActivityLabel(enum.Enum):
    ACTIVE = 1
    INACTIVE = -1
    EXCLUDED = 0

    @property
    def sign(self) -> int:
        if self is ActivityLabel.EXCLUDED:
            raise ValueError("excluded customers carry no training label")
        return self.value


class EmptyDatasetError(DataError):
    pass


def last_positive_index(counts) -> int | None:
    nz = np.flatnonzero(np.asarray(counts) > 0)
    return int(nz[-1]) if nz.size else None


def classify_activity(series: DownloadSeries, observation_end: dt.date, gap_days: int = DEFAULT_GAP_DAYS) -> ActivityLabel:
    if gap_days < 1:
        raise ValueError("gap_days must be >= 1")
    last = last_positive_index(series.counts)
    if last is None:
        return ActivityLabel.EXCLUDED
    last_day = series.start_date + dt.timedelta(days=last)
    if (observation_end - last_day).days >= gap_days:
        return ActivityLabel.INACTIVE
    return ActivityLabel.ACTIVE


@dataclass(frozen=True, eq=False)
class LabeledEntry:
    customer_id: str
    start_date: dt.date
    counts: np.ndarray
    label: ActivityLabel

    def __post_init__(self):
        arr = np.array(self.counts, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.counts) - 1)

    def __eq__(self, other):
        if not isinstance(other, LabeledEntry):
            return NotImplemented
        return (
            self.customer_id == other.customer_id
            and self.start_date == other.start_date
            and self.label is other.label
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True)
class LabeledDataset:
    entries: tuple[LabeledEntry, ...]
    excluded_ids: tuple[str, ...]
    observation_end: dt.date
    gap_days: int = DEFAULT_GAP_DAYS

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label.sign for e in self.entries], dtype=np.int64)

    def counts(self) -> dict[str, int]:
        n_active = sum(e.label is ActivityLabel.ACTIVE for e in self.entries)
        return {
            "active": n_active,
            "inactive": len(self.entries) - n_active,
            "excluded": len(self.excluded_ids),
        }

    def summary_line(self) -> str:
        c = self.counts()
        return f"active={c['active']} inactive={c['inactive']} excluded={c['excluded']}"

    def with_labels(self, labels) -> "LabeledDataset":
        """Copy with entry labels replaced (used for null-signal experiments)."""
        labels = list(labels)
        if len(labels) != len(self.entries):
            raise ValueError("label count does not match entry count")
        entries = tuple(
            LabeledEntry(e.customer_id, e.start_date, e.counts, ActivityLabel(int(lab)))
            for e, lab in zip(self.entries, labels)
        )
        return LabeledDataset(entries, self.excluded_ids, self.observation_end, self.gap_days)

    def to_raw(self) -> RawDataset:
        series = [DownloadSeries(e.customer_id, e.start_date, e.counts) for e in self.entries]
        return RawDataset.from_series(series, self.observation_end)


def align_and_label(dataset: RawDataset | LabeledDataset, gap_days: int = DEFAULT_GAP_DAYS) -> LabeledDataset:
    """Label every customer and align inactive series on their last download.

    Inactive series are cut right after their last positive day; active
    series are zero-extended to the observation end.  Passing an already
    aligned dataset returns an equal dataset.
    """
    carried: tuple[str, ...] = ()
    if isinstance(dataset, LabeledDataset):
        carried = dataset.excluded_ids
        dataset = dataset.to_raw() if dataset.entries else RawDataset({}, dataset.observation_end)
    if len(dataset) == 0 and not carried:
        raise EmptyDatasetError("dataset has no customers")

    end = dataset.observation_end
    entries: list[LabeledEntry] = []
    excluded = list(carried)
    for s in dataset:
        label = classify_activity(s, end, gap_days)
        if label is ActivityLabel.EXCLUDED:
            excluded.append(s.customer_id)
            continue
        if label is ActivityLabel.INACTIVE:
            counts = s.counts[: last_positive_index(s.counts) + 1]
        else:
            pad = (end - s.end_date).days
            counts = np.concatenate([s.counts, np.zeros(pad)]) if pad else s.counts
        entries.append(LabeledEntry(s.customer_id, s.start_date, counts, label))

    if not entries:
        raise EmptyDatasetError("every customer is excluded (no downloads at all)")
    return LabeledDataset(tuple(entries), tuple(sorted(excluded)), end, gap_days)


def label_rows(dataset: RawDataset, gap_days: int = DEFAULT_GAP_DAYS):
    """Yield (customer_id, label name, days since last download or None)."""
    end = dataset.observation_end
    for s in dataset:
        label = classify_activity(s, end, gap_days)
        last = last_positive_index(s.counts)
        offset = None if last is None else (end - s.start_date).days - last
        yield s.customer_id, label.name.lower(), offset


def write_labels_csv(dataset: RawDataset, stream: TextIO, gap_days: int = DEFAULT_GAP_DAYS) -> dict[str, int]:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("customer_id", "label", "last_download_offset_days"))
    tally = {"active": 0, "inactive": 0, "excluded": 0}
    for cid, name, offset in label_rows(dataset, gap_days):
        writer.writerow((cid, name, "" if offset is None else offset))
        tally[name] += 1
    return tally
