"""Lexicon polarity scoring with one-token negation."""

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import FormatError, ValidationError

DEFAULT_NEGATORS = frozenset({"not", "no", "never", "n't"})


@dataclass(frozen=True)
class Lexicon:
    entries: dict
    negators: frozenset = field(default=DEFAULT_NEGATORS)

    def __post_init__(self):
        if not self.negators:
            raise ValidationError("negator set must be non-empty")
        bad = [t for t, v in self.entries.items() if not -1.0 <= v <= 1.0]
        if bad:
            raise ValidationError(f"polarity outside [-1, 1] for {bad[0]!r}")

    def is_negator(self, token):
        # contractions such as "don't" carry the negation in their suffix
        return token in self.negators or ("n't" in self.negators and token.endswith("n't"))

    def negated(self):
        return Lexicon({t: -v for t, v in self.entries.items()}, self.negators)


@dataclass(frozen=True)
class SentimentSeries:
    days: tuple
    scores: np.ndarray

    @property
    def entries(self):
        return list(zip(self.days, self.scores.tolist()))


def parse_lexicon(text, negators=DEFAULT_NEGATORS):
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"lexicon line {lineno}: expected token<TAB>polarity")
        try:
            value = float(parts[1])
        except ValueError:
            raise FormatError(f"lexicon line {lineno}: bad polarity {parts[1]!r}") from None
        entries.setdefault(parts[0].strip().lower(), value)
    return Lexicon(entries, frozenset(negators))


def load_lexicon(path=None, negators=DEFAULT_NEGATORS):
    """Load a ``token<TAB>polarity`` file; ``None`` loads the bundled lexicon."""
    if path is None:
        text = resources.files("newsvol.data").joinpath("lexicon.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_lexicon(text, negators)


def lexicon_score(tokens, lexicon):
    """Mean polarity over lexicon hits; a hit right after a negator flips sign.

    Tokens outside the lexicon do not enter the denominator. No hits gives 0.0.
    """
    total = 0.0
    hits = 0
    prev = None
    for tok in tokens:
        polarity = lexicon.entries.get(tok)
        if polarity is not None:
            if prev is not None and lexicon.is_negator(prev):
                polarity = -polarity
            total += polarity
            hits += 1
        prev = tok
    return total / hits if hits else 0.0


def daily_sentiment(days, lexicon):
    """Mean headline score per day; a day without headlines scores 0.0."""
    scores = []
    for dn in days:
        if dn.count == 0:
            scores.append(0.0)
            continue
        scores.append(sum(lexicon_score(h.tokens, lexicon) for h in dn.headlines) / dn.count)
    return SentimentSeries(tuple(dn.day for dn in days), np.asarray(scores, dtype=np.float64))
