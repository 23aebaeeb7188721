import io
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from newsvol.embeddings import MissingDay, embed_days, load_vectors
from newsvol.errors import AlignmentError, InsufficientDataError
from newsvol.features import (FeatureFrame, Standardizer, align, build_lagged, count_frame, embedding_frame,
                              fit_standardizer, har_frame, read_frame_csv, sentiment_frame, write_frame_csv)
from newsvol.market_data import LabelSeries, RvSeries, har_features
from newsvol.news import CleanHeadline, DailyNews
from newsvol.sentiment import Lexicon, daily_sentiment

MON = date(2020, 3, 9)


def days_from(start, n):
    return tuple(start + timedelta(days=i) for i in range(n))


def frame(values, start=MON, channel="count"):
    m = np.asarray(values, dtype=float)
    m = m.reshape(len(m), -1)
    return FeatureFrame(days_from(start, len(m)), m, tuple(f"c{j}" for j in range(m.shape[1])), channel)


def labels(start, values):
    return LabelSeries(days_from(start, len(values)), np.asarray(values, dtype=np.int8))


class TestBuildLagged:
    def test_one_lag(self):
        lagged = build_lagged(frame([1, 2, 3, 4]), 1)
        assert_array_equal(lagged.matrix, [[2, 1], [3, 2], [4, 3]])
        assert lagged.columns == ("c0_lag0", "c0_lag1")
        assert lagged.dates == days_from(MON + timedelta(days=1), 3)

    def test_identity(self):
        f = frame([[1, 2], [3, 4]])
        lagged = build_lagged(f, 0)
        assert_array_equal(lagged.matrix, f.matrix)
        assert lagged.columns == f.columns

    def test_column_count(self):
        assert build_lagged(frame(np.ones((5, 2))), 2).matrix.shape[1] == 6

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            build_lagged(frame([1, 2]), 2)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_lag_blocks_match_base(self, p, width, seed):
        base = frame(np.random.default_rng(seed).normal(size=(p + 5, width)))
        lagged = build_lagged(base, p)
        for i in range(len(lagged)):
            t = i + p
            for k in range(p + 1):
                assert_array_equal(lagged.matrix[i, k * width:(k + 1) * width], base.matrix[t - k])


class TestStandardizer:
    def test_example(self):
        out = fit_standardizer(np.array([[1.0], [2.0], [3.0]])).apply(np.array([[1.0], [2.0], [3.0]]))
        # population std of (1, 2, 3) is sqrt(2/3)
        assert_allclose(out.ravel(), [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)

    def test_constant_column(self):
        s = fit_standardizer(np.full((3, 1), 5.0))
        assert s.stds.tolist() == [1.0]
        assert_array_equal(s.apply(np.full((3, 1), 5.0)), np.zeros((3, 1)))

    def test_mean_row_maps_to_zero(self, rng):
        x = rng.normal(size=(20, 4))
        s = fit_standardizer(x)
        assert_allclose(s.apply(x.mean(axis=0)[None, :]), np.zeros((1, 4)), atol=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientDataError):
            fit_standardizer(np.ones((1, 3)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 4)),
                  elements=st.floats(-1e3, 1e3, allow_nan=False)))
    def test_zero_mean_unit_std(self, x):
        z = fit_standardizer(x).apply(x)
        assert_allclose(z.mean(axis=0), 0.0, atol=1e-10)
        spread = x.std(axis=0) > 1e-12 * np.maximum(1.0, np.abs(x.mean(axis=0)))
        assert_allclose(z.std(axis=0)[spread], 1.0, atol=1e-10)

    def test_round_trip(self, rng):
        s = fit_standardizer(rng.normal(size=(5, 2)))
        back = Standardizer.from_dict(s.to_dict())
        assert_array_equal(back.means, s.means)
        assert_array_equal(back.stds, s.stds)


class TestAlign:
    def test_calendar_join(self):
        feats = build_lagged(frame([1, 2], start=MON), 0)
        ds = align(feats, labels(MON + timedelta(days=1), [1, 0]))
        assert ds.dates == (MON, MON + timedelta(days=1))
        assert ds.label_dates == (MON + timedelta(days=1), MON + timedelta(days=2))
        assert ds.y.tolist() == [1, 0]

    def test_missing_next_label_dropped(self):
        feats = build_lagged(frame([1, 2, 3], start=MON), 0)
        ds = align(feats, labels(MON + timedelta(days=1), [1]), calendar=days_from(MON, 4))
        assert len(ds) == 1
        assert ds.dropped["no_next_label"] == 2

    def test_disjoint(self):
        feats = build_lagged(frame([1, 2], start=MON + timedelta(days=10)), 0)
        with pytest.raises(AlignmentError):
            align(feats, labels(MON, [1, 0]))

    def test_off_calendar_rows_counted(self):
        feats = build_lagged(frame([1, 2, 3], start=MON), 0)
        cal = (MON, MON + timedelta(days=2), MON + timedelta(days=3))
        ds = align(feats, labels(MON + timedelta(days=2), [1, 0]), calendar=cal)
        assert ds.dropped["off_calendar"] == 1
        assert ds.label_dates == (MON + timedelta(days=2), MON + timedelta(days=3))

    def test_labels_strictly_after(self, rng):
        feats = build_lagged(frame(rng.normal(size=30)), 3)
        ds = align(feats, labels(MON, rng.integers(0, 2, 35)))
        assert all(l > d for d, l in zip(ds.dates, ds.label_dates))


class TestChannelFrames:
    def news(self):
        h = lambda d, t: CleanHeadline(d, tuple(t.split()), t)
        return [DailyNews(MON, (h(MON, "oil gain now"), h(MON, "oil slump now"))),
                DailyNews(MON + timedelta(days=1), ()),
                DailyNews(MON + timedelta(days=2), (h(MON + timedelta(days=2), "zzz yyy xxx"),))]

    def test_count_keeps_empty_days(self):
        f = count_frame(self.news())
        assert f.matrix.ravel().tolist() == [2.0, 0.0, 1.0]

    def test_sentiment_drops_empty_days(self):
        days = self.news()
        f = sentiment_frame(daily_sentiment(days, Lexicon({"gain": 0.5})), days)
        assert f.dates == (MON, MON + timedelta(days=2))

    def test_embedding_skips_missing(self):
        daily = embed_days(self.news(), load_vectors("oil 1 0\ngain 0 1\n"))
        assert isinstance(daily[1], MissingDay) and isinstance(daily[2], MissingDay)
        f = embedding_frame(daily)
        assert f.dates == (MON,)
        assert f.columns == ("emb0", "emb1")

    def test_har_rows_filed_under_previous_day(self, rng):
        rv = RvSeries(days_from(MON, 25), rng.gamma(2.0, 1.0, 25))
        f = har_frame(har_features(rv), rv)
        assert f.dates == rv.days[21:24]
        assert f.matrix[0, 0] == rv.rv[21]

    def test_csv_round_trip(self, rng):
        f = frame(rng.normal(size=(4, 3)), channel="embedding")
        buf = io.StringIO()
        write_frame_csv(f, buf, ["seed=3"])
        back = read_frame_csv(io.StringIO(buf.getvalue()))
        assert buf.getvalue().startswith("# channel=embedding\n")
        assert back.dates == f.dates and back.channel == "embedding"
        assert_array_equal(back.matrix, f.matrix)


def test_sentinel_token_never_reaches_earlier_rows():
    """A token seen only on day T must not change any dataset row dated before T."""
    n, sentinel_day = 40, 25
    store = load_vectors("oil 0.5 0.2\nprice 0.1 0.9\nsentinel 50 -50\n")
    cal = days_from(MON, n)
    lab = labels(cal[1], np.arange(n - 1) % 2)

    def dataset(with_sentinel):
        days = []
        for i, d in enumerate(cal):
            tokens = ["oil", "price"] if i % 3 else ["price"]
            if with_sentinel and i == sentinel_day:
                tokens = tokens + ["sentinel"]
            days.append(DailyNews(d, (CleanHeadline(d, tuple(tokens), " ".join(tokens)),)))
        return align(build_lagged(embedding_frame(embed_days(days, store)), 5), lab, calendar=cal)

    clean, marked = dataset(False), dataset(True)
    assert clean.dates == marked.dates
    before = np.array([d < cal[sentinel_day] for d in clean.dates])
    assert_array_equal(clean.X[before], marked.X[before])
    assert not np.array_equal(clean.X[~before], marked.X[~before])
