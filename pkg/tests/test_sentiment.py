from datetime import date

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from newsvol.errors import FormatError, ValidationError
from newsvol.news import CleanHeadline, DailyNews
from newsvol.sentiment import Lexicon, daily_sentiment, lexicon_score, load_lexicon, parse_lexicon

LEX = Lexicon({"good": 1.0, "bad": -1.0, "gain": 0.6, "slump": -0.7})
WORDS = ["good", "bad", "gain", "slump", "not", "never", "oil", "don't", "price"]


def day(d, *token_lists):
    return DailyNews(d, tuple(CleanHeadline(d, tuple(t), " ".join(t)) for t in token_lists))


class TestLexiconScore:
    def test_single_match(self):
        assert lexicon_score(["good"], LEX) == 1.0

    def test_negation(self):
        assert lexicon_score(["not", "good"], LEX) == -1.0

    def test_symmetry(self):
        assert lexicon_score(["good", "bad"], LEX) == 0.0

    def test_unmatched(self):
        assert lexicon_score(["oil", "price"], LEX) == 0.0

    def test_unmatched_outside_denominator(self):
        assert lexicon_score(["oil", "gain", "price"], LEX) == pytest.approx(0.6)

    def test_contraction_negates(self):
        assert lexicon_score(["don't", "gain"], LEX) == pytest.approx(-0.6)

    def test_window_is_one_token(self):
        assert lexicon_score(["not", "oil", "good"], LEX) == 1.0

    @given(st.lists(st.sampled_from(WORDS), max_size=12))
    def test_bounded(self, tokens):
        assert -1.0 <= lexicon_score(tokens, LEX) <= 1.0

    @given(st.lists(st.sampled_from(WORDS), max_size=12))
    def test_antisymmetry(self, tokens):
        assert lexicon_score(tokens, LEX.negated()) == -lexicon_score(tokens, LEX)

    @given(st.lists(st.sampled_from(WORDS), max_size=12))
    def test_adding_positive_token_does_not_lower_score(self, tokens):
        before = lexicon_score(tokens, LEX)
        if before >= 1.0 or (tokens and LEX.is_negator(tokens[-1])):
            return
        assert lexicon_score(tokens + ["good"], LEX) >= before


class TestDailySentiment:
    def test_mean_of_headlines(self):
        series = daily_sentiment([day(date(2020, 1, 2), ["good"], ["oil"])], LEX)
        assert_array_equal(series.scores, [0.5])

    def test_empty_day(self):
        assert daily_sentiment([day(date(2020, 1, 2))], LEX).scores.tolist() == [0.0]

    def test_single_headline(self):
        lex = Lexicon({"dip": -0.4})
        assert daily_sentiment([day(date(2020, 1, 2), ["dip"])], lex).scores.tolist() == [-0.4]


class TestLexiconFile:
    def test_parse(self):
        lex = parse_lexicon("# comment\nGood\t0.5\nbad -0.5  # trailing\n\ngood\t0.1\n")
        assert lex.entries == {"good": 0.5, "bad": -0.5}

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            parse_lexicon("boom\t1.5\n")

    def test_malformed(self):
        with pytest.raises(FormatError):
            parse_lexicon("just-a-token\n")

    def test_bundled(self):
        lex = load_lexicon()
        assert len(lex.entries) > 20
        assert all(-1.0 <= v <= 1.0 for v in lex.entries.values())

    def test_empty_negators_rejected(self):
        with pytest.raises(ValidationError):
            Lexicon({}, frozenset())


def test_scores_dtype():
    series = daily_sentiment([day(date(2020, 1, 2), ["gain"])], LEX)
    assert series.scores.dtype == np.float64
