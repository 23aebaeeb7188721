"""Kernel SHAP over daily feature vectors and its redistribution to articles and words.

Masked features take the background mean, so the all-masked coalition is the
model output at that mean and serves as the base value.
"""

import math
from dataclasses import dataclass
from datetime import date
from importlib import resources

import numpy as np

from .embeddings import DailyEmbedding
from .errors import ConfigError, ContractError, ValidationError

EXACT_MAX_DIM = 12
DEFAULT_TOP_K = 20


@dataclass(frozen=True)
class ShapExplanation:
    date: object
    base_value: float
    values: np.ndarray
    model_output: float
    mode: str  # "exact" or "sampled"

    @property
    def additivity_gap(self):
        return abs(self.base_value + float(np.sum(self.values)) - self.model_output)


@dataclass(frozen=True)
class WordImpact:
    word: str
    mean_abs_impact: float
    occurrence_count: int


@dataclass(frozen=True)
class WordShare:
    date: object
    word: str
    share: float


@dataclass(frozen=True)
class PeriodSpec:
    name: str
    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise ValidationError(f"period {self.name!r} starts after it ends")

    def contains(self, d):
        return self.start <= d <= self.end


DEFAULT_PERIODS = (
    PeriodSpec("pre_pandemic", date.min, date(2019, 12, 31)),
    PeriodSpec("epidemic_shock", date(2020, 1, 1), date(2020, 6, 30)),
    PeriodSpec("epidemic_stabilization", date(2020, 7, 1), date(2022, 2, 23)),
    PeriodSpec("russia_ukraine_conflict", date(2022, 2, 24), date.max),
)


def validate_periods(periods):
    ordered = list(periods)
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise ValidationError(f"periods {a.name!r} and {b.name!r} overlap or are out of order")
    return ordered


# --------------------------------------------------------------------------
# kernel SHAP
# --------------------------------------------------------------------------

def _masked_inputs(masks, x, reference):
    return np.where(masks, x[None, :], reference[None, :])


def _exact_values(model, x, reference):
    d = x.shape[0]
    codes = np.arange(1 << d, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    v = np.asarray(model(_masked_inputs(bits, x, reference)), dtype=np.float64)
    sizes = bits.sum(axis=1)
    weight_by_size = np.array([math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d)
                               for s in range(d)])
    values = np.empty(d)
    for i in range(d):
        without = codes[~bits[:, i]]
        values[i] = np.dot(weight_by_size[sizes[without]], v[without | (1 << i)] - v[without])
    return values, float(v[0]), float(v[-1])


def sample_coalitions(d, n_samples, rng):
    """Paired coalition masks with sizes drawn from the Shapley kernel.

    Size ``s`` (1..d-1) is drawn with probability proportional to
    ``(d - 1) / (s (d - s))``; every mask is followed by its complement.
    """
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p /= p.sum()
    half = n_samples // 2
    drawn = rng.choice(sizes, size=half, p=p)
    masks = np.zeros((2 * half, d), dtype=bool)
    for j, s in enumerate(drawn):
        masks[2 * j, rng.choice(d, size=s, replace=False)] = True
        masks[2 * j + 1] = ~masks[2 * j]
    return masks


def _sampled_values(model, x, reference, n_samples, rng):
    d = x.shape[0]
    masks = sample_coalitions(d, n_samples, rng)
    ends = np.asarray(model(np.vstack([reference, x])), dtype=np.float64)
    base, fx = float(ends[0]), float(ends[1])
    v = np.asarray(model(_masked_inputs(masks, x, reference)), dtype=np.float64)
    # drawing coalitions from the kernel makes the regression weights uniform;
    # the efficiency constraint is imposed by eliminating the last feature
    delta = fx - base
    z = masks.astype(np.float64)
    target = (v - base) - z[:, -1] * delta
    design = z[:, :-1] - z[:, -1:]
    head, *_ = np.linalg.lstsq(design, target, rcond=None)
    return np.append(head, delta - head.sum()), base, fx


def kernel_shap(model, x, background, n_samples=2048, rng=None, when=None, mode="auto"):
    """Shapley attributions of ``model`` at ``x``.

    ``model`` maps an (m, d) array to m class-1 probabilities. ``mode="auto"``
    enumerates every coalition for ``d <= 12`` and samples otherwise.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.shape[0] == 0:
        raise ContractError("background set is empty")
    if background.shape[1] != x.shape[0]:
        raise ContractError("background and x differ in dimension")
    reference = background.mean(axis=0)
    d = x.shape[0]
    if mode == "auto":
        mode = "exact" if d <= EXACT_MAX_DIM else "sampled"
    if mode == "exact":
        values, base, fx = _exact_values(model, x, reference)
    elif mode == "sampled":
        if n_samples < 2 * d:
            raise ConfigError(f"n_samples={n_samples} is below 2 x dimension ({2 * d})")
        rng = rng if rng is not None else np.random.default_rng(0)
        values, base, fx = _sampled_values(model, x, reference, n_samples, rng)
    else:
        raise ConfigError(f"unknown SHAP mode {mode!r}")
    return ShapExplanation(when, base, values, fx, mode)


def day_rng(seed, day):
    """Per-day generator so serial and parallel explanation runs agree."""
    return np.random.default_rng([int(seed), day.toordinal()])


def sample_background(train_rows, size=100, seed=0):
    train_rows = np.asarray(train_rows, dtype=np.float64)
    if train_rows.shape[0] <= size:
        return train_rows.copy()
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(train_rows.shape[0], size=size, replace=False))
    return train_rows[idx]


# --------------------------------------------------------------------------
# redistribution
# --------------------------------------------------------------------------

def proportional_article_impacts(values, daily):
    """Split each dimension's SHAP value over articles by their share of the pooled value.

    Article i receives ``values[d] * x_i[d] / (N * pooled[d])``; dimensions
    whose pooled value is zero are split evenly. The impacts sum to
    ``values.sum()``.
    """
    articles = np.asarray(daily.article_vectors, dtype=np.float64)
    n = articles.shape[0]
    if n == 0:
        raise ContractError("day has no articles to attribute to")
    values = np.asarray(values, dtype=np.float64)
    pooled = np.asarray(daily.vector, dtype=np.float64)
    scale = np.maximum(np.abs(articles).max(axis=0), 1.0)
    zero = np.abs(pooled) <= 1e-12 * scale
    share = np.empty_like(articles)
    share[:, ~zero] = articles[:, ~zero] / (n * pooled[~zero])
    share[:, zero] = 1.0 / n
    return share @ values


def article_attribution(explanation_values, day, rule=proportional_article_impacts):
    """Per-article impact totals for one day; ``rule`` picks the redistribution strategy."""
    if not isinstance(day, DailyEmbedding):
        raise ContractError("article attribution needs a DailyEmbedding")
    return rule(explanation_values, day)


def meaningful_tokens(tokens, stopwords, min_length=2):
    return [t for t in tokens if len(t) >= min_length and t not in stopwords]


def word_shares(article_impacts, headlines, stopwords, when=None, min_length=2):
    """Split each article's absolute impact evenly over its meaningful tokens."""
    if len(article_impacts) != len(headlines):
        raise ContractError("one impact per headline is required")
    out = []
    for impact, h in zip(article_impacts, headlines):
        words = meaningful_tokens(h.tokens, stopwords, min_length)
        if not words:
            continue
        share = abs(float(impact)) / len(words)
        out.extend(WordShare(when if when is not None else h.date, w, share) for w in words)
    return out


def aggregate_words(shares):
    totals = {}
    for s in shares:
        acc = totals.setdefault(s.word, [0.0, 0])
        acc[0] += s.share
        acc[1] += 1
    return [WordImpact(w, t / n, n) for w, (t, n) in totals.items()]


def word_attribution(article_impacts, headlines, stopwords, min_length=2):
    """Mean share and occurrence count per word across the given articles."""
    return aggregate_words(word_shares(article_impacts, headlines, stopwords, min_length=min_length))


def rank_words(impacts, top_k=DEFAULT_TOP_K):
    ranked = sorted(impacts, key=lambda w: (-w.mean_abs_impact, -w.occurrence_count, w.word))
    return ranked[:top_k] if top_k is not None else ranked


@dataclass(frozen=True)
class PeriodReport:
    periods: tuple
    rankings: dict  # period name -> ranked WordImpact list
    unassigned: int


def period_report(shares, periods=DEFAULT_PERIODS, top_k=DEFAULT_TOP_K):
    """Rank words per period by mean absolute share; shares outside every period are tallied."""
    periods = validate_periods(periods)
    buckets = {p.name: [] for p in periods}
    unassigned = 0
    for s in shares:
        for p in periods:
            if p.contains(s.date):
                buckets[p.name].append(s)
                break
        else:
            unassigned += 1
    rankings = {name: rank_words(aggregate_words(b), top_k) for name, b in buckets.items()}
    return PeriodReport(tuple(periods), rankings, unassigned)


def load_stopwords(path=None, extra=()):
    if path is None:
        text = resources.files("newsvol.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = {w.strip().lower() for w in text.split() if w.strip() and not w.startswith("#")}
    return frozenset(words | {w.lower() for w in extra})


def period_csv(ranking):
    lines = ["rank,word,mean_abs_impact,count"]
    for r, w in enumerate(ranking, start=1):
        lines.append(f"{r},{w.word},{w.mean_abs_impact!r},{w.occurrence_count}")
    return "\n".join(lines) + "\n"
