"""Pipeline stages behind the CLI. Each stage reads and writes files in the output directory."""

import csv
import hashlib
import io
import json
import logging
import os
import platform
import warnings
from datetime import date

import numpy as np

from . import __version__
from ._backend import BACKEND
from .embeddings import DailyEmbedding, EmbeddingProvider, embed_days, embed_days_remote, load_vector_file
from .errors import ConfigError, DependencyError, InsufficientDataError
from .evaluation import (classification_metrics, mcnemar, mcnemar_table, metrics_table, read_prediction_csv,
                         rolling_eval, write_prediction_csv, fit_window)
from .explain import (article_attribution, day_rng, kernel_shap, load_stopwords, period_csv, period_report,
                      sample_background, word_shares)
from .features import (align, build_lagged, count_frame, embedding_frame, har_frame, read_frame_csv,
                       sentiment_frame, write_frame_csv)
from .market_data import (LabelSeries, SkippedDayWarning, direction_labels, har_features, log_returns, parse_bars,
                          read_rv_csv, realized_variance, write_rv_csv)
from .news import (CleanHeadline, Dropped, align_to_calendar, clean_headline, group_by_day,
                   load_cleaning_rules, read_headlines_csv)
from .sentiment import daily_sentiment, load_lexicon

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
LOCK = ".newsvol.lock"
BASELINE = "har"


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


class Workspace:
    """Output directory bookkeeping: artifact writes, dependency checks, manifest."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.root = cfg.output_dir
        os.makedirs(self.root, exist_ok=True)

    def path(self, name):
        return os.path.join(self.root, name)

    def write(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def require(self, name):
        p = self.path(name)
        if not os.path.isfile(p):
            raise DependencyError(f"missing upstream artifact {name}; run the stage that produces it first")
        return p

    def read(self, name):
        with open(self.require(name), encoding="utf-8", newline="") as fh:
            return fh.read()

    def header_lines(self):
        return [f"seed={self.cfg.seed}", self.cfg.ensemble_spec.describe(), f"lags={self.cfg.lags}",
                f"newsvol={__version__} backend={BACKEND}"]

    def write_manifest(self):
        inputs = {}
        for key in ("bars", "news", "vectors", "lexicon", "cleaning_rules", "stopwords"):
            p = self.cfg.path(key)
            if p is not None and os.path.isfile(p):
                with open(p, "rb") as fh:
                    inputs[key] = _sha256(fh.read())
        outputs = {}
        for name in sorted(os.listdir(self.root)):
            full = self.path(name)
            if name in (MANIFEST, LOCK) or not os.path.isfile(full):
                continue
            with open(full, "rb") as fh:
                outputs[name] = _sha256(fh.read())
        manifest = {
            "config": self.cfg.snapshot(),
            "seed": self.cfg.seed,
            "inputs": inputs,
            "outputs": outputs,
            "versions": {"newsvol": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "backend": BACKEND},
        }
        self.write(MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# ingest
# --------------------------------------------------------------------------

def ingest(cfg, ws):
    with open(cfg.path("bars"), "rb") as fh:
        bars = parse_bars(fh.read())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SkippedDayWarning)
        returns = log_returns(bars, cfg.data["interval_minutes"])
    skipped = sum(1 for w in caught if issubclass(w.category, SkippedDayWarning))
    rv = realized_variance(returns)
    labels = direction_labels(rv)

    with open(cfg.path("news"), "rb") as fh:
        raw = read_headlines_csv(fh.read())
    rules = load_cleaning_rules(cfg.path("cleaning_rules"))
    kept, dropped = [], []
    for h in raw:
        out = clean_headline(h, rules)
        (dropped if isinstance(out, Dropped) else kept).append(out)

    buf = io.StringIO()
    write_rv_csv(rv, buf, [f"seed={cfg.seed}"])
    ws.write("rv.csv", buf.getvalue())
    lines = [f"# seed={cfg.seed}", "date,label"]
    lines += [f"{d.isoformat()},{v}" for d, v in labels.entries]
    ws.write("labels.csv", "\n".join(lines) + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "tokens", "original"])
    for h in kept:
        writer.writerow([h.date.isoformat(), " ".join(h.tokens), h.original])
    ws.write("news_clean.csv", buf.getvalue())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "reason", "original"])
    for h in dropped:
        writer.writerow([h.date.isoformat(), h.reason, h.original])
    ws.write("news_dropped.csv", buf.getvalue())

    reasons = {}
    for h in dropped:
        reasons[h.reason] = reasons.get(h.reason, 0) + 1
    summary = {"bars": len(bars), "rv_days": len(rv), "skipped_days": skipped, "labels": len(labels),
               "headlines_raw": len(raw), "headlines_kept": len(kept), "dropped": dict(sorted(reasons.items()))}
    ws.write("ingest_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _read_labels(ws):
    days, values = [], []
    for line in ws.read("labels.csv").splitlines():
        if not line or line.startswith("#") or line.startswith("date,"):
            continue
        d, v = line.split(",")
        days.append(date.fromisoformat(d))
        values.append(int(v))
    return LabelSeries(tuple(days), np.asarray(values, dtype=np.int8))


def _read_clean_news(ws):
    reader = csv.reader(io.StringIO(ws.read("news_clean.csv")))
    next(reader, None)
    return [CleanHeadline(date.fromisoformat(d), tuple(t.split()), o) for d, t, o in reader]


def _rv(ws):
    return read_rv_csv(io.StringIO(ws.read("rv.csv")))


def trading_news(ws):
    rv = _rv(ws)
    return rv, align_to_calendar(group_by_day(_read_clean_news(ws)), rv.days)


def daily_embeddings(cfg, days):
    if cfg.path("vectors") is not None:
        return embed_days(days, load_vector_file(cfg.path("vectors")))
    prov = cfg.data["provider"]
    provider = EmbeddingProvider(prov["endpoint"], prov["model_name"], int(prov.get("batch_size", 32)),
                                 cfg.path("cache"))
    return embed_days_remote(days, provider)


# --------------------------------------------------------------------------
# features
# --------------------------------------------------------------------------

def features(cfg, ws):
    rv, days = trading_news(ws)
    frames = {}
    if "count" in cfg.channels:
        frames["count"] = count_frame(days)
    if "sentiment" in cfg.channels:
        lexicon = load_lexicon(cfg.path("lexicon"))
        frames["sentiment"] = sentiment_frame(daily_sentiment(days, lexicon), days)
    if "embedding" in cfg.channels:
        frames["embedding"] = embedding_frame(daily_embeddings(cfg, days))
    rows = har_features(rv)
    if not rows:
        raise InsufficientDataError("HAR baseline needs more than 22 RV days")
    frames[BASELINE] = har_frame(rows, rv)
    for name, frame in frames.items():
        buf = io.StringIO()
        write_frame_csv(frame, buf, ws.header_lines())
        ws.write(f"features_{name}.csv", buf.getvalue())
    return {name: len(f) for name, f in frames.items()}


def model_names(cfg):
    return [BASELINE] + cfg.channels


def load_datasets(cfg, ws):
    """Datasets for every model, restricted to the feature dates all of them share."""
    rv = _rv(ws)
    labels = _read_labels(ws)
    datasets = {}
    for name in model_names(cfg):
        frame = read_frame_csv(io.StringIO(ws.read(f"features_{name}.csv")))
        p = 0 if name == BASELINE else cfg.lags
        datasets[name] = align(build_lagged(frame, p), labels, calendar=rv.days)
    common = set.intersection(*(set(ds.dates) for ds in datasets.values()))
    if not common:
        raise InsufficientDataError("the channels share no evaluation dates")
    return {name: _restrict(ds, common) for name, ds in datasets.items()}


def _restrict(ds, keep):
    idx = np.array([i for i, d in enumerate(ds.dates) if d in keep], dtype=np.int64)
    dropped = dict(ds.dropped)
    dropped["not_shared"] = len(ds) - len(idx)
    return type(ds)(tuple(ds.dates[i] for i in idx), ds.X[idx], ds.y[idx], tuple(ds.label_dates[i] for i in idx),
                    ds.feature_rows[idx], ds.columns, ds.channel, dropped)


# --------------------------------------------------------------------------
# evaluate / mcnemar
# --------------------------------------------------------------------------

def evaluate(cfg, ws):
    datasets = load_datasets(cfg, ws)
    reports = {}
    for name, ds in datasets.items():
        log = rolling_eval(ds, cfg.ensemble_spec, cfg.rolling, n_jobs=cfg.data["n_jobs"])
        buf = io.StringIO()
        write_prediction_csv(log, buf, ws.header_lines() + [f"model={name}"])
        ws.write(f"predictions_{name}.csv", buf.getvalue())
        reports[name] = classification_metrics(log)
        logger.info("%s: accuracy %.4f over %d days", name, reports[name].accuracy, len(log))
    payload = {"header": ws.header_lines(), "models": {n: r.as_dict() for n, r in reports.items()},
               "rows": {n: len(ds) for n, ds in datasets.items()}}
    ws.write("metrics.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    ws.write("metrics_table.csv", metrics_table(reports, ws.header_lines()))
    return reports


def run_mcnemar(cfg, ws):
    names = model_names(cfg)
    logs = {n: read_prediction_csv(io.StringIO(ws.read(f"predictions_{n}.csv"))) for n in names}
    results = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            results[(b, a)] = mcnemar(logs[b], logs[a])
    payload = {"header": ws.header_lines(),
               "pairs": {f"{a}_vs_{b}": r.as_dict() for (a, b), r in results.items()}}
    ws.write("mcnemar.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    ws.write("mcnemar_table.csv", mcnemar_table(names, results, ws.header_lines()))
    return results


# --------------------------------------------------------------------------
# explain
# --------------------------------------------------------------------------

def explain(cfg, ws):
    shap_cfg = cfg.shap
    channel = shap_cfg["channel"]
    if channel != "embedding":
        raise ConfigError("shap.channel: word attribution needs the embedding channel")
    if channel not in cfg.channels:
        raise ConfigError("shap.channel: embedding channel is not enabled")
    ws.require(f"predictions_{channel}.csv")
    ds = load_datasets(cfg, ws)[channel]
    _, days = trading_news(ws)
    daily = {d.day: d for d in daily_embeddings(cfg, days) if isinstance(d, DailyEmbedding)}
    news_by_day = {dn.day: dn for dn in days}
    base_dates = read_frame_csv(io.StringIO(ws.read(f"features_{channel}.csv"))).dates
    p = cfg.lags
    spec = cfg.ensemble_spec
    plan = cfg.rolling.schedule(len(ds))
    stopwords = load_stopwords(cfg.path("stopwords"))

    shares = []
    day_rows = ["date,base_value,model_output,sum_values,mode"]
    for start, stop, test in plan:
        when = ds.dates[test]
        model = fit_window(ds, start, stop, spec)
        rng = day_rng(cfg.seed, when)
        background = sample_background(ds.X[start:stop], shap_cfg["background_size"], seed=int(rng.integers(2**32)))
        exp = kernel_shap(lambda z: model.predict_proba(z)[:, 1], ds.X[test], background,
                          n_samples=shap_cfg["n_samples"], rng=rng, when=when, mode=shap_cfg["mode"])
        day_rows.append(f"{when.isoformat()},{exp.base_value!r},{exp.model_output!r},"
                        f"{float(exp.values.sum())!r},{exp.mode}")
        dim = len(exp.values) // (p + 1)
        lag_row = int(ds.feature_rows[test])
        for k in range(p + 1):
            src = daily[base_dates[lag_row + p - k]]
            impacts = article_attribution(exp.values[k * dim:(k + 1) * dim], src)
            heads = [news_by_day[src.day].headlines[i] for i in src.article_index]
            shares.extend(word_shares(impacts, heads, stopwords, when=when))

    report = period_report(shares, cfg.periods, shap_cfg["top_k"])
    header = "\n".join(f"# {h}" for h in ws.header_lines()) + "\n"
    ws.write("shap_days.csv", header + "\n".join(day_rows) + "\n")
    payload = {"header": ws.header_lines(), "unassigned": report.unassigned, "periods": []}
    for period in report.periods:
        ranking = report.rankings[period.name]
        ws.write(f"shap_words_{period.name}.csv", header + period_csv(ranking))
        payload["periods"].append({
            "name": period.name,
            "start": None if period.start == date.min else period.start.isoformat(),
            "end": None if period.end == date.max else period.end.isoformat(),
            "words": [{"rank": r, "word": w.word, "mean_abs_impact": w.mean_abs_impact, "count": w.occurrence_count}
                      for r, w in enumerate(ranking, start=1)],
        })
    ws.write("shap_report.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return report


STAGES = {
    "ingest": ingest,
    "features": features,
    "evaluate": evaluate,
    "mcnemar": run_mcnemar,
    "explain": explain,
}
ORDER = ("ingest", "features", "evaluate", "mcnemar", "explain")
