"""Headline ingestion: regex cleaning, tokenization, daily grouping and counts."""

import bisect
import csv
import io
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from importlib import resources

import yaml

from .errors import ConfigError, ParseError, ValidationError

logger = logging.getLogger(__name__)

# bound on re-cleaning passes; each pass only removes text so this converges quickly
_MAX_PASSES = 8


@dataclass(frozen=True)
class RawHeadline:
    date: date
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError(f"{self.date}: empty headline")


@dataclass(frozen=True)
class CleanHeadline:
    date: date
    tokens: tuple
    original: str


@dataclass(frozen=True)
class Dropped:
    date: date
    reason: str  # url_only | too_short | boilerplate
    original: str


@dataclass(frozen=True)
class DailyNews:
    day: date
    headlines: tuple = ()

    @property
    def count(self):
        return len(self.headlines)


@dataclass(frozen=True)
class CleaningRules:
    url_patterns: tuple = ()
    email_patterns: tuple = ()
    date_patterns: tuple = ()
    boilerplate: tuple = ()
    min_tokens: int = 3
    _compiled: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.min_tokens < 0:
            raise ConfigError("min_tokens must be non-negative")
        try:
            compiled = {
                "url": [re.compile(p, re.IGNORECASE) for p in self.url_patterns],
                "email": [re.compile(p, re.IGNORECASE) for p in self.email_patterns],
                "date": [re.compile(p, re.IGNORECASE) for p in self.date_patterns],
                "boilerplate": [re.compile(r"\b" + re.escape(p) + r"\b", re.IGNORECASE)
                                for p in self.boilerplate],
            }
        except re.error as exc:
            raise ConfigError(f"bad cleaning pattern: {exc}") from None
        object.__setattr__(self, "_compiled", compiled)

    @classmethod
    def from_mapping(cls, data):
        unknown = set(data) - {"url_patterns", "email_patterns", "date_patterns", "boilerplate", "min_tokens"}
        if unknown:
            raise ConfigError([f"unknown cleaning rule key {k!r}" for k in sorted(unknown)])
        return cls(
            url_patterns=tuple(data.get("url_patterns", ())),
            email_patterns=tuple(data.get("email_patterns", ())),
            date_patterns=tuple(data.get("date_patterns", ())),
            boilerplate=tuple(data.get("boilerplate", ())),
            min_tokens=int(data.get("min_tokens", 3)),
        )


def load_cleaning_rules(path=None):
    """Read cleaning rules from YAML; ``None`` loads the bundled defaults."""
    if path is None:
        text = resources.files("newsvol.data").joinpath("cleaning_rules.yaml").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return CleaningRules.from_mapping(yaml.safe_load(text) or {})


def _strip_punct(token):
    a, b = 0, len(token)
    while a < b and unicodedata.category(token[a]).startswith("P"):
        a += 1
    while b > a and unicodedata.category(token[b - 1]).startswith("P"):
        b -= 1
    return token[a:b]


def tokenize(text):
    """Lowercase whitespace tokens with leading/trailing punctuation removed."""
    tokens = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


def _scrub(text, rules):
    hits = set()
    for kind in ("url", "email", "date", "boilerplate"):
        for pattern in rules._compiled[kind]:
            text, n = pattern.subn(" ", text)
            if n:
                hits.add(kind)
    return text, hits


def clean_headline(raw, rules=None):
    """Return a :class:`CleanHeadline`, or :class:`Dropped` when too little text survives.

    Cleaning is repeated on its own output until the token list stops
    changing, so cleaning a surviving headline again is a no-op.
    """
    rules = rules if rules is not None else default_rules()
    text, hits = _scrub(raw.text, rules)
    tokens = tokenize(text)
    for _ in range(_MAX_PASSES):
        again, more = _scrub(" ".join(tokens), rules)
        hits |= more
        next_tokens = tokenize(again)
        if next_tokens == tokens:
            break
        tokens = next_tokens
    if len(tokens) < max(rules.min_tokens, 1):
        if not tokens and "url" in hits:
            reason = "url_only"
        elif "boilerplate" in hits:
            reason = "boilerplate"
        else:
            reason = "too_short"
        return Dropped(raw.date, reason, raw.text)
    return CleanHeadline(raw.date, tuple(tokens), raw.text)


_DEFAULT_RULES = None


def default_rules():
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = load_cleaning_rules()
    return _DEFAULT_RULES


def group_by_day(headlines):
    """One :class:`DailyNews` per date, ascending; input order kept within a day."""
    buckets = {}
    for h in headlines:
        buckets.setdefault(h.date, []).append(h)
    return [DailyNews(d, tuple(buckets[d])) for d in sorted(buckets)]


def align_to_calendar(days, calendar):
    """Move each day's news onto the next trading day at or after it.

    Every calendar day gets an entry (possibly empty). News dated after the
    last trading day has nowhere to go and is discarded.
    """
    calendar = sorted(calendar)
    merged = {d: [] for d in calendar}
    late = 0
    for dn in days:
        i = bisect.bisect_left(calendar, dn.day)
        if i == len(calendar):
            late += dn.count
            continue
        merged[calendar[i]].extend(dn.headlines)
    if late:
        logger.info("discarded %d headlines dated after the last trading day", late)
    return [DailyNews(d, tuple(merged[d])) for d in calendar]


def news_count_feature(days):
    """Per-day headline count as a float series: ``[(date, count), ...]``."""
    return [(dn.day, float(dn.count)) for dn in days]


def read_headlines_csv(source):
    """Parse a ``date,headline`` CSV; rows with blank headlines are skipped."""
    if isinstance(source, bytes):
        source = source.decode("utf-8-sig")
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    out = []
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if lineno == 1 and row[0].strip().lower() == "date":
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        try:
            d = date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not row[1].strip():
            logger.debug("line %d: blank headline skipped", lineno)
            continue
        out.append(RawHeadline(d, row[1]))
    return out
