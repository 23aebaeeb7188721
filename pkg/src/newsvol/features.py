"""Per-channel feature frames, lag stacking, standardization and label alignment."""

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .embeddings import DailyEmbedding
from .errors import AlignmentError, FormatError, InsufficientDataError, ValidationError

CHANNELS = ("count", "sentiment", "embedding", "har")


@dataclass(frozen=True)
class FeatureFrame:
    dates: tuple
    matrix: np.ndarray
    columns: tuple
    channel: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValidationError(f"unknown channel {self.channel!r}")
        if self.matrix.ndim != 2 or self.matrix.shape != (len(self.dates), len(self.columns)):
            raise ValidationError("matrix shape must be (len(dates), len(columns))")
        if not np.all(np.isfinite(self.matrix)):
            raise ValidationError("feature frame has missing or non-finite cells")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class LaggedFrame:
    """Row ``i`` stacks base rows ``i + p, i + p - 1, ..., i`` (newest first)."""

    base: FeatureFrame
    p: int
    matrix: np.ndarray
    columns: tuple

    @property
    def dates(self):
        return self.base.dates[self.p:]

    def __len__(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Features dated ``dates[i]`` paired with the label of the next trading day."""

    dates: tuple
    X: np.ndarray
    y: np.ndarray
    label_dates: tuple
    feature_rows: np.ndarray  # row index into the LaggedFrame
    columns: tuple
    channel: str
    dropped: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.dates)


class Standardizer:
    """Column-wise z-scoring with population std; zero-spread columns get std 1."""

    def __init__(self, means, stds):
        self.means = np.asarray(means, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        if np.any(self.stds <= 0):
            raise ValidationError("standardizer stds must be positive")

    @classmethod
    def fit(cls, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise InsufficientDataError("standardizer needs at least 2 training rows")
        means = rows.mean(axis=0)
        stds = rows.std(axis=0)
        stds[stds <= 1e-12 * np.maximum(1.0, np.abs(means))] = 1.0
        return cls(means, stds)

    def apply(self, rows):
        return (np.asarray(rows, dtype=np.float64) - self.means) / self.stds

    def to_dict(self):
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["means"], data["stds"])


def fit_standardizer(train_rows):
    return Standardizer.fit(train_rows)


# --------------------------------------------------------------------------
# frame constructors, one per channel
# --------------------------------------------------------------------------

def count_frame(days):
    """Headline counts for every trading day, including zero-news days."""
    return FeatureFrame(
        tuple(dn.day for dn in days),
        np.array([[float(dn.count)] for dn in days]).reshape(len(days), 1),
        ("count",),
        "count",
    )


def sentiment_frame(series, days):
    """Sentiment for days that actually had news; empty days are left out."""
    keep = [i for i, dn in enumerate(days) if dn.count > 0]
    if len(series.days) != len(days):
        raise ValidationError("sentiment series and daily news must cover the same days")
    return FeatureFrame(
        tuple(series.days[i] for i in keep),
        series.scores[keep].reshape(len(keep), 1),
        ("sentiment",),
        "sentiment",
    )


def embedding_frame(daily):
    """Pooled vectors for covered days; :class:`MissingDay` entries are skipped."""
    kept = [d for d in daily if isinstance(d, DailyEmbedding)]
    if not kept:
        raise InsufficientDataError("no day has embedding coverage")
    dim = kept[0].vector.shape[0]
    return FeatureFrame(
        tuple(d.day for d in kept),
        np.vstack([d.vector for d in kept]),
        tuple(f"emb{j}" for j in range(dim)),
        "embedding",
    )


def har_frame(rows, rv):
    """HAR rows dated by the last RV day they use.

    A row for day t is built from RV up to t-1, so it is filed under t-1; the
    next-day alignment then pairs it with the label of day t.
    """
    index = {d: i for i, d in enumerate(rv.days)}
    dates = tuple(rv.days[index[r.day] - 1] for r in rows)
    matrix = np.array([[r.rv_daily, r.rv_weekly, r.rv_monthly] for r in rows], dtype=np.float64)
    return FeatureFrame(dates, matrix.reshape(len(rows), 3), ("rv_daily", "rv_weekly", "rv_monthly"), "har")


# --------------------------------------------------------------------------
# lags and alignment
# --------------------------------------------------------------------------

def build_lagged(frame, p):
    """Stack each row with its ``p`` predecessors, newest block first."""
    if p < 0:
        raise ValueError("lag order must be non-negative")
    n = len(frame)
    if p >= n:
        raise InsufficientDataError(f"lag order {p} needs more than {p} rows, frame has {n}")
    blocks = [frame.matrix[p - k:n - k] for k in range(p + 1)]
    columns = tuple(f"{c}_lag{k}" for k in range(p + 1) for c in frame.columns) if p else frame.columns
    return LaggedFrame(frame, p, np.hstack(blocks), columns)


def align(features, labels, calendar=None):
    """Pair each feature row dated t with the label of the trading day after t.

    ``calendar`` lists the trading days; by default it is the union of the
    feature and label dates. Rows dated off-calendar, or whose next trading
    day has no label, are dropped and counted in ``Dataset.dropped``.
    """
    if calendar is None:
        calendar = set(features.dates) | set(labels.days)
    calendar = sorted(calendar)
    label_of = dict(zip(labels.days, labels.labels.tolist()))
    pos = {d: i for i, d in enumerate(calendar)}
    rows, dates, label_dates, y = [], [], [], []
    dropped = {"off_calendar": 0, "no_next_label": 0}
    for i, d in enumerate(features.dates):
        j = pos.get(d)
        if j is None:
            dropped["off_calendar"] += 1
            continue
        if j + 1 >= len(calendar) or calendar[j + 1] not in label_of:
            dropped["no_next_label"] += 1
            continue
        nxt = calendar[j + 1]
        rows.append(i)
        dates.append(d)
        label_dates.append(nxt)
        y.append(label_of[nxt])
    if not rows:
        raise AlignmentError("no feature row has a next-day label")
    used = set(label_dates)
    dropped["unused_labels"] = sum(1 for d in labels.days if d not in used)
    rows = np.asarray(rows, dtype=np.int64)
    return Dataset(
        tuple(dates), features.matrix[rows], np.asarray(y, dtype=np.int64), tuple(label_dates),
        rows, features.columns, features.base.channel, dropped,
    )


# --------------------------------------------------------------------------
# CSV round trip
# --------------------------------------------------------------------------

def write_frame_csv(frame, stream, header_lines=()):
    stream.write(f"# channel={frame.channel}\n")
    for line in header_lines:
        stream.write(f"# {line}\n")
    stream.write("date," + ",".join(frame.columns) + "\n")
    for d, row in zip(frame.dates, frame.matrix.tolist()):
        stream.write(d.isoformat() + "," + ",".join(repr(v) for v in row) + "\n")


def read_frame_csv(stream):
    channel = None
    columns = None
    dates, rows = [], []
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("channel=") and channel is None:
                channel = body.split("=", 1)[1]
            continue
        if columns is None:
            columns = tuple(line.split(",")[1:])
            continue
        parts = line.split(",")
        dates.append(date.fromisoformat(parts[0]))
        rows.append([float(v) for v in parts[1:]])
    if channel is None or columns is None:
        raise FormatError("feature CSV lacks a channel header or column row")
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return FeatureFrame(tuple(dates), matrix, columns, channel)

