"""Intraday bars to daily realized variance, direction labels and HAR features."""

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

import numpy as np

from . import kernels
from .errors import InsufficientDataError, ParseError, ValidationError

logger = logging.getLogger(__name__)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_MINUTES_PER_DAY = 1440
HAR_WEEK = 5
HAR_MONTH = 22


class SkippedDayWarning(UserWarning):
    """A day had too few resampled bars to form a return."""


@dataclass(frozen=True)
class Bar:
    timestamp: datetime
    price: float


@dataclass(frozen=True)
class BarSeries:
    """Bars sorted by time. ``minutes`` counts whole minutes since the UTC epoch."""

    minutes: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        if self.minutes.shape != self.prices.shape:
            raise ValidationError("minutes and prices must have equal length")
        if np.any(self.prices <= 0):
            raise ValidationError("bar prices must be positive")
        if np.any(np.diff(self.minutes) <= 0):
            raise ValidationError("bar timestamps must be strictly increasing")

    def __len__(self):
        return int(self.minutes.shape[0])

    def __iter__(self):
        for m, p in zip(self.minutes.tolist(), self.prices.tolist()):
            yield Bar(_EPOCH + timedelta(minutes=m), p)

    @classmethod
    def from_bars(cls, bars):
        bars = sorted(bars, key=lambda b: b.timestamp)
        minutes = np.array([_to_minutes(b.timestamp) for b in bars], dtype=np.int64)
        prices = np.array([b.price for b in bars], dtype=np.float64)
        return cls(minutes, prices)


@dataclass(frozen=True)
class ReturnSeries:
    day: date
    returns: np.ndarray
    interval_minutes: int = 5


@dataclass(frozen=True)
class RvSeries:
    days: tuple
    rv: np.ndarray

    def __post_init__(self):
        if len(self.days) != self.rv.shape[0]:
            raise ValidationError("days and rv must have equal length")
        if np.any(self.rv < 0):
            raise ValidationError("realized variance must be non-negative")
        if any(b <= a for a, b in zip(self.days, self.days[1:])):
            raise ValidationError("days must be strictly increasing")

    def __len__(self):
        return len(self.days)

    @property
    def entries(self):
        return list(zip(self.days, self.rv.tolist()))


@dataclass(frozen=True)
class LabelSeries:
    days: tuple
    labels: np.ndarray

    def __len__(self):
        return len(self.days)

    @property
    def entries(self):
        return list(zip(self.days, self.labels.tolist()))


@dataclass(frozen=True)
class HarFeatureRow:
    day: date
    rv_daily: float
    rv_weekly: float
    rv_monthly: float


def _to_minutes(ts):
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    delta = ts.astimezone(timezone.utc) - _EPOCH
    return int(delta.total_seconds() // 60)


def _parse_timestamp(text):
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _as_text(source):
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8-sig") if isinstance(data, bytes) else data


def parse_bars(source):
    """Parse a ``timestamp,price`` CSV into a sorted :class:`BarSeries`.

    ``source`` may be bytes, str or a text/binary stream. The header row is
    optional. Timestamps without a zone are taken as UTC.
    """
    text = _as_text(source)
    minutes, prices = [], []
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip().lower() == "timestamp":
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        try:
            ts = _parse_timestamp(row[0])
            price = float(row[1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not math.isfinite(price) or price <= 0:
            raise ValidationError(f"line {lineno}: non-positive price {row[1].strip()!r}")
        minutes.append(_to_minutes(ts))
        prices.append(price)
    m = np.asarray(minutes, dtype=np.int64)
    p = np.asarray(prices, dtype=np.float64)
    order = np.argsort(m, kind="stable")
    m, p = m[order], p[order]
    dup = np.flatnonzero(np.diff(m) == 0)
    if dup.size:
        when = _EPOCH + timedelta(minutes=int(m[dup[0]]))
        raise ValidationError(f"duplicate timestamp {when:%Y-%m-%dT%H:%M}")
    return BarSeries(m, p)


def _day_of(minute):
    return (_EPOCH + timedelta(minutes=int(minute))).date()


def log_returns(bars, interval_minutes=5):
    """Within-day log returns on a fixed grid of ``interval_minutes`` boundaries.

    Each grid point takes the last bar at or before it. Grid points run from
    the first boundary at or after the day's first bar to the last boundary at
    or before its last bar, so overnight moves never enter a return. Days that
    end up with fewer than two grid points are skipped with a
    :class:`SkippedDayWarning`.
    """
    if interval_minutes <= 0:
        raise ValueError("interval_minutes must be positive")
    out = []
    if len(bars) == 0:
        return out
    day_index = bars.minutes // _MINUTES_PER_DAY
    bounds = np.flatnonzero(np.diff(day_index)) + 1
    starts = np.concatenate(([0], bounds))
    ends = np.concatenate((bounds, [len(bars)]))
    for a, b in zip(starts.tolist(), ends.tolist()):
        midnight = int(day_index[a]) * _MINUTES_PER_DAY
        rel = bars.minutes[a:b] - midnight
        first = -(-int(rel[0]) // interval_minutes) * interval_minutes
        grid = np.arange(first, int(rel[-1]) + 1, interval_minutes)
        day = _day_of(bars.minutes[a])
        if grid.size < 2:
            warnings.warn(f"{day}: fewer than 2 grid points, day skipped", SkippedDayWarning, stacklevel=2)
            logger.warning("skipping %s: %d bars, %d grid points", day, b - a, grid.size)
            continue
        idx = np.searchsorted(rel, grid, side="right") - 1
        snapped = bars.prices[a:b][idx]
        # log of the price ratio, so rescaling every price by a power of two is bit-exact
        out.append(ReturnSeries(day, np.log(snapped[1:] / snapped[:-1]), interval_minutes))
    return out


def realized_variance(returns):
    """Daily sum of squared intraday returns; days without returns are omitted."""
    kept = [r for r in returns if len(r.returns)]
    if not kept:
        return RvSeries((), np.empty(0))
    kept.sort(key=lambda r: r.day)
    lengths = np.array([len(r.returns) for r in kept], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    values = np.concatenate([np.asarray(r.returns, dtype=np.float64) for r in kept])
    rv = kernels.segment_sum_squares(values, offsets)
    return RvSeries(tuple(r.day for r in kept), rv)


def direction_labels(rv):
    """1 when RV rises strictly above the previous day, else 0 (ties count as a decrease)."""
    if len(rv) < 2:
        raise InsufficientDataError("direction labels need at least 2 RV observations")
    labels = (rv.rv[1:] > rv.rv[:-1]).astype(np.int8)
    return LabelSeries(tuple(rv.days[1:]), labels)


def har_features(rv):
    """Daily, weekly (5-day) and monthly (22-day) means of RV strictly before each day.

    Rows start at the first day with a full month of history.
    """
    if len(rv) <= HAR_MONTH:
        return []
    x = np.ascontiguousarray(rv.rv, dtype=np.float64)
    weekly = kernels.trailing_mean(x, HAR_WEEK, HAR_MONTH)
    monthly = kernels.trailing_mean(x, HAR_MONTH, HAR_MONTH)
    daily = x[HAR_MONTH - 1:-1]
    return [
        HarFeatureRow(d, float(a), float(w), float(m))
        for d, a, w, m in zip(rv.days[HAR_MONTH:], daily, weekly, monthly)
    ]


def write_rv_csv(rv, stream, header_lines=()):
    for line in header_lines:
        stream.write(f"# {line}\n")
    stream.write("date,rv\n")
    for d, v in rv.entries:
        stream.write(f"{d.isoformat()},{v!r}\n")


def read_rv_csv(stream):
    days, values = [], []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("date,"):
            continue
        d, v = line.split(",")
        days.append(date.fromisoformat(d))
        values.append(float(v))
    return RvSeries(tuple(days), np.asarray(values, dtype=np.float64))
