"""Synthetic fixture: intraday bars, headlines with a planted token, and toy word vectors.

The planted token appears on day t with probability ``p_hit`` when RV rises on
day t+1 and ``p_miss`` otherwise. Headline counts are drawn independently of
the labels, so the count channel carries no signal by construction.
"""

import csv
import os
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
import yaml

PLANTED = "surge"

FILLER = (
    "oil crude brent opec output export import refinery fuel market price prices barrel "
    "supply demand stocks inventory tanker pipeline gasoline diesel distillate shale rig "
    "drilling production exports imports traders futures benchmark cargo asia europe "
    "texas russia saudi iraq iran china india nigeria angola norway sea field storage "
    "shipping freight spread contract delivery quota policy ministers talks meeting "
    "forecast outlook report data weekly monthly analysts bank index dollar "
    "gains falls fears rally slump risk"
).split()
FUNCTION_WORDS = ("the", "of", "in", "on", "for", "as", "to", "and", "at", "by")
BOILERPLATE = "Reporting by Jane Doe"


@dataclass(frozen=True)
class Fixture:
    bars_path: str
    news_path: str
    vectors_path: str
    config_path: str
    labels: np.ndarray  # planned direction for days 1..n-1
    planted_days: tuple


def trading_days(start, n):
    days = []
    d = start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def _rv_path(labels, rng, rv0=1e-4):
    rv = [rv0]
    for up in labels:
        z = np.log(rv[-1] / rv0)
        step = rng.uniform(0.08, 0.45)
        # larger moves back toward rv0 keep the path bounded without touching the labels
        step *= np.exp(-0.5 * z) if up else np.exp(0.5 * z)
        step = float(np.clip(step, 0.03, 1.5))
        rv.append(rv[-1] * np.exp(step if up else -step))
    return np.array(rv)


def _bars_for_day(day, rv, start_price, rng, open_minute=9 * 60, n_returns=96):
    r = rng.standard_normal(n_returns)
    r *= np.sqrt(rv / np.dot(r, r))
    log_p = np.log(start_price) + np.concatenate(([0.0], np.cumsum(r)))
    prices = np.exp(log_p)
    rows = []
    for i, p in enumerate(prices.tolist()):
        minute = open_minute + 5 * i
        rows.append(f"{day.isoformat()}T{minute // 60:02d}:{minute % 60:02d},{p!r}")
    return rows, float(prices[-1])


def _headline(rng, n_words):
    words = list(rng.choice(FILLER, size=n_words, replace=True))
    if rng.random() < 0.5:
        words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(FUNCTION_WORDS)))
    return words


def _decorate(words, rng):
    text = " ".join(words)
    roll = rng.random()
    if roll < 0.05:
        text += " https://news.example.com/a/" + str(int(rng.integers(1000, 9999)))
    elif roll < 0.08:
        text += " contact desk@example.com"
    elif roll < 0.10:
        text += " - " + BOILERPLATE
    if rng.random() < 0.3:
        text = text[0].upper() + text[1:]
    return text


def generate(out_dir, n_days=600, seed=7, n_dims=10, p_hit=0.9, p_miss=0.1, start=date(2021, 1, 4),
             train_fraction=0.8, planted_shift=20.0):
    """Write ``bars.csv``, ``news.csv``, ``vectors.txt`` and ``config.yaml`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    days = trading_days(start, n_days)
    labels = (rng.random(n_days - 1) < 0.5).astype(np.int8)
    rv = _rv_path(labels, rng)

    bar_rows = ["timestamp,price"]
    price = 80.0
    for d, v in zip(days, rv):
        rows, last = _bars_for_day(d, float(v), price * np.exp(0.002 * rng.standard_normal()), rng)
        bar_rows.extend(rows)
        price = last

    news_rows = []
    planted = []
    for t, d in enumerate(days):
        n_head = 3 + int(rng.poisson(1.5))
        heads = [_headline(rng, int(rng.integers(4, 8))) for _ in range(n_head)]
        if t + 1 < n_days:
            p = p_hit if labels[t] else p_miss
            if rng.random() < p:
                h = heads[int(rng.integers(0, n_head))]
                h.insert(int(rng.integers(0, len(h) + 1)), PLANTED)
                planted.append(d)
        for h in heads:
            news_rows.append((d, _decorate(h, rng)))
        if rng.random() < 0.05:
            news_rows.append((d, "Oil up"))
        if d.weekday() == 4 and rng.random() < 0.3:
            news_rows.append((d + timedelta(days=1), _decorate(_headline(rng, 5), rng)))

    vocab = list(FILLER) + list(FUNCTION_WORDS)
    vec_rng = np.random.default_rng(seed + 1)
    vectors = {w: vec_rng.uniform(0.2, 1.0, n_dims) for w in vocab}
    vectors[PLANTED] = vec_rng.uniform(0.2, 1.0, n_dims) + planted_shift

    bars_path = os.path.join(out_dir, "bars.csv")
    news_path = os.path.join(out_dir, "news.csv")
    vectors_path = os.path.join(out_dir, "vectors.txt")
    config_path = os.path.join(out_dir, "config.yaml")
    with open(bars_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(bar_rows) + "\n")
    with open(news_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "headline"])
        for d, text in news_rows:
            writer.writerow([d.isoformat(), text])
    with open(vectors_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {n_dims}\n")
        for w, v in vectors.items():
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")

    # HAR rows (re-dated one day back) start at day 21 and the last feature day is n-2
    n_rows = n_days - 22
    n_eval = n_rows - int(np.floor(train_fraction * n_rows))
    eval_days = days[n_days - 1 - n_eval:n_days - 1]
    chunks = np.array_split(np.arange(len(eval_days)), 4)
    names = ("phase_1", "phase_2", "phase_3", "phase_4")
    periods = [{"name": nm, "start": eval_days[c[0]].isoformat(), "end": eval_days[c[-1]].isoformat()}
               for nm, c in zip(names, chunks)]
    config = {
        "paths": {"bars": "bars.csv", "news": "news.csv", "vectors": "vectors.txt",
                  "output_dir": "out"},
        "channels": ["count", "sentiment", "embedding"],
        "lags": 5,
        "seed": seed,
        "rolling": {"train_fraction": train_fraction},
        "periods": periods,
    }
    with open(config_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    return Fixture(bars_path, news_path, vectors_path, config_path, labels, tuple(planted))
