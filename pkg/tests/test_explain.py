from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from newsvol.embeddings import DailyEmbedding
from newsvol.errors import ConfigError, ContractError, ValidationError
from newsvol.explain import (DEFAULT_PERIODS, PeriodSpec, WordImpact, WordShare, aggregate_words, article_attribution,
                             day_rng, kernel_shap, load_stopwords, period_report, rank_words, sample_background,
                             sample_coalitions, word_attribution, word_shares)
from newsvol.news import CleanHeadline
from oracles import masked_value, shapley_by_permutations, shapley_by_subsets

D = date(2020, 3, 9)
STOP = frozenset({"the", "of", "on"})


def linear(coef, intercept=0.0):
    coef = np.asarray(coef, dtype=float)
    return lambda z: np.atleast_2d(z) @ coef + intercept


def smooth_model(seed, d):
    r = np.random.default_rng(seed)
    w, v = r.normal(size=d), r.normal(size=d)
    return lambda z: 1 / (1 + np.exp(-(np.atleast_2d(z) @ w + np.sin(np.atleast_2d(z) @ v))))


def headline(text):
    return CleanHeadline(D, tuple(text.split()), text)


def daily(vectors):
    vectors = np.asarray(vectors, dtype=float)
    return DailyEmbedding(D, vectors.mean(axis=0), vectors, tuple(range(len(vectors))))


class TestKernelShapExact:
    def test_linear_example(self):
        exp = kernel_shap(linear([2.0, 3.0]), [1.0, 1.0], np.zeros((4, 2)))
        assert exp.mode == "exact"
        assert_allclose(exp.values, [2.0, 3.0], atol=1e-12)

    def test_at_background_mean(self):
        bg = np.random.default_rng(1).normal(size=(10, 3))
        exp = kernel_shap(smooth_model(0, 3), bg.mean(axis=0), bg)
        assert_allclose(exp.values, 0.0, atol=1e-15)
        assert exp.model_output == exp.base_value

    def test_dummy_feature(self):
        model = lambda z: np.tanh(np.atleast_2d(z)[:, 0] * np.atleast_2d(z)[:, 2])
        exp = kernel_shap(model, [1.0, 5.0, -2.0], np.zeros((3, 3)))
        assert exp.values[1] == 0.0

    def test_symmetric_features(self):
        model = lambda z: np.atleast_2d(z)[:, 0] * np.atleast_2d(z)[:, 1]
        exp = kernel_shap(model, [2.0, 2.0, 1.0], np.zeros((1, 3)))
        assert exp.values[0] == pytest.approx(exp.values[1], abs=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 4, 6])
    def test_permutation_oracle(self, d):
        model = smooth_model(d, d)
        x = np.random.default_rng(d).normal(size=d)
        bg = np.random.default_rng(d + 10).normal(size=(8, d))
        exp = kernel_shap(model, x, bg)
        oracle = shapley_by_permutations(masked_value(model, x, bg.mean(axis=0)), d)
        assert_allclose(exp.values, oracle, atol=1e-9)
        assert exp.additivity_gap < 1e-9

    def test_subset_oracle_d12(self):
        d = 12
        model = smooth_model(7, d)
        x = np.random.default_rng(3).normal(size=d)
        ref = np.zeros((1, d))
        exp = kernel_shap(model, x, ref)
        assert_allclose(exp.values, shapley_by_subsets(masked_value(model, x, ref[0]), d), atol=1e-9)

    def test_empty_background(self):
        with pytest.raises(ContractError):
            kernel_shap(linear([1.0]), [1.0], np.zeros((0, 1)))


class TestKernelShapSampled:
    def test_linear_20d(self):
        coef = np.random.default_rng(5).normal(size=20)
        x = np.random.default_rng(6).normal(size=20)
        bg = np.random.default_rng(7).normal(size=(50, 20))
        exp = kernel_shap(linear(coef), x, bg, n_samples=4096, rng=np.random.default_rng(0))
        assert exp.mode == "sampled"
        assert np.max(np.abs(exp.values - coef * (x - bg.mean(axis=0)))) < 0.05
        assert exp.additivity_gap < 1e-9

    def test_too_few_samples(self):
        with pytest.raises(ConfigError):
            kernel_shap(linear(np.ones(20)), np.ones(20), np.zeros((1, 20)), n_samples=39)

    def test_coalitions_paired(self):
        masks = sample_coalitions(6, 100, np.random.default_rng(0))
        assert masks.shape == (100, 6)
        assert np.all(masks[0::2] == ~masks[1::2])
        assert np.all((masks.sum(1) >= 1) & (masks.sum(1) <= 5))

    def test_day_rng_reproducible(self):
        model = smooth_model(1, 15)
        x, bg = np.ones(15), np.zeros((2, 15))
        a = kernel_shap(model, x, bg, 200, rng=day_rng(3, D))
        b = kernel_shap(model, x, bg, 200, rng=day_rng(3, D))
        c = kernel_shap(model, x, bg, 200, rng=day_rng(3, D + timedelta(days=1)))
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_forced_exact_mode(self):
        exp = kernel_shap(linear(np.arange(3.0)), np.ones(3), np.zeros((1, 3)), mode="sampled", n_samples=64)
        assert_allclose(exp.values, [0.0, 1.0, 2.0], atol=1e-9)


class TestArticleAttribution:
    def test_single_article(self):
        values = np.array([0.2, -0.5, 0.1])
        impacts = article_attribution(values, daily([[1.0, 2.0, 3.0]]))
        assert impacts[0] == pytest.approx(values.sum(), abs=1e-15)

    def test_identical_articles(self):
        values = np.array([0.2, 0.4])
        impacts = article_attribution(values, daily([[1.0, 1.0], [1.0, 1.0]]))
        assert_allclose(impacts, [0.3, 0.3])

    def test_zero_pooled_dimension_split_evenly(self):
        impacts = article_attribution(np.array([1.0, 0.6]), daily([[1.0, 2.0], [-1.0, 2.0]]))
        assert_allclose(impacts, [0.8, 0.8])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_conservation(self, n, d, seed):
        r = np.random.default_rng(seed)
        values = r.normal(size=d)
        impacts = article_attribution(values, daily(r.normal(size=(n, d))))
        assert abs(impacts.sum() - values.sum()) < 1e-9

    def test_needs_daily_embedding(self):
        with pytest.raises(ContractError):
            article_attribution(np.ones(2), object())


class TestWords:
    def test_equal_division(self):
        shares = word_shares([0.4], [headline("oil price gains today")], STOP)
        assert [s.share for s in shares] == pytest.approx([0.1] * 4)

    def test_mean_and_count(self):
        (impact,) = aggregate_words([WordShare(D, "oil", 0.1), WordShare(D, "oil", 0.3)])
        assert impact.mean_abs_impact == pytest.approx(0.2) and impact.occurrence_count == 2

    def test_all_stopwords(self):
        assert word_attribution([0.5], [headline("the of on")], STOP) == []

    def test_short_tokens_and_sign(self):
        shares = word_shares([-0.6], [headline("a oil of x up")], STOP)
        assert [(s.word, s.share) for s in shares] == [("oil", pytest.approx(0.3)), ("up", pytest.approx(0.3))]

    def test_mass_conserved(self):
        impacts = [0.3, -0.2, 0.05]
        heads = [headline("crude oil rally"), headline("opec on cuts"), headline("the of")]
        total = sum(s.share for s in word_shares(impacts, heads, STOP))
        assert total == pytest.approx(0.5, abs=1e-12)

    def test_bundled_stopwords(self):
        words = load_stopwords(extra=("Crude",))
        assert "the" in words and "crude" in words


class TestPeriods:
    def test_ranking_and_top_k(self):
        ranked = rank_words([WordImpact("b", 0.3, 1), WordImpact("a", 0.5, 1)], top_k=1)
        assert [w.word for w in ranked] == ["a"]

    def test_tie_break_by_count_then_word(self):
        ranked = rank_words([WordImpact("x", 0.2, 2), WordImpact("y", 0.2, 5), WordImpact("w", 0.2, 2)])
        assert [w.word for w in ranked] == ["y", "w", "x"]

    def test_top_k_larger_than_vocabulary(self):
        assert len(rank_words([WordImpact("x", 0.2, 2)], top_k=20)) == 1

    def test_unassigned_tally(self):
        periods = [PeriodSpec("p1", date(2020, 1, 1), date(2020, 1, 31))]
        shares = [WordShare(date(2020, 1, 5), "oil", 0.2), WordShare(date(2020, 3, 1), "gas", 0.1)]
        report = period_report(shares, periods)
        assert report.unassigned == 1
        assert [w.word for w in report.rankings["p1"]] == ["oil"]

    def test_default_boundaries(self):
        assert [(p.start, p.end) for p in DEFAULT_PERIODS[1:3]] == [
            (date(2020, 1, 1), date(2020, 6, 30)), (date(2020, 7, 1), date(2022, 2, 23))]
        assert DEFAULT_PERIODS[0].contains(date(2019, 12, 31)) and DEFAULT_PERIODS[3].contains(date(2022, 2, 24))

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            period_report([], [PeriodSpec("a", D, D + timedelta(days=3)), PeriodSpec("b", D, D)])

    def test_start_after_end(self):
        with pytest.raises(ValidationError):
            PeriodSpec("bad", D, D - timedelta(days=1))


def test_background_sampling():
    rows = np.arange(300, dtype=float).reshape(150, 2)
    a = sample_background(rows, 100, seed=4)
    assert a.shape == (100, 2)
    assert np.array_equal(a, sample_background(rows, 100, seed=4))
    assert sample_background(rows[:10], 100).shape == (10, 2)
