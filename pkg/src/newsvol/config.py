"""Run configuration: defaults, YAML file, and command-line overrides (flags > file > defaults)."""

import copy
import os
from datetime import date

import yaml

from .classifiers import EnsembleSpec
from .errors import ConfigError, NewsVolError
from .evaluation import RollingConfig
from .explain import DEFAULT_PERIODS, PeriodSpec, validate_periods
from .features import CHANNELS

CACHE_ENV = "NEWSVOL_CACHE"

DEFAULTS = {
    "paths": {
        "bars": None,
        "news": None,
        "vectors": None,
        "lexicon": None,
        "cleaning_rules": None,
        "stopwords": None,
        "cache": "embeddings.cache",
        "output_dir": "out",
    },
    "channels": ["count", "sentiment", "embedding"],
    "interval_minutes": 5,
    "lags": 5,
    "ensemble": {"k": 5, "l2_lambda": 1.0, "var_floor": 1e-9, "weights": [1.0, 1.0, 1.0],
                 "tol": 1e-6, "max_iter": 1000},
    "rolling": {"train_fraction": 0.8, "step": 1, "window_mode": "sliding", "window": None, "min_window": 30},
    "shap": {"channel": "embedding", "n_samples": 2048, "background_size": 100, "top_k": 20, "mode": "auto"},
    "periods": [{"name": p.name, "start": None if p.start == date.min else p.start.isoformat(),
                 "end": None if p.end == date.max else p.end.isoformat()} for p in DEFAULT_PERIODS],
    "provider": None,  # {"endpoint": ..., "model_name": ..., "batch_size": ...}
    "seed": 0,
    "n_jobs": 1,
}


def _merge(base, override, path, problems):
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            problems.append(f"{where}: unknown setting")
        elif isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, where, problems)
        else:
            base[key] = value


def apply_override(data, assignment):
    """Apply ``a.b.c=value`` (value parsed as YAML) to a nested config dict."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"{key}: unknown setting")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"{key}: unknown setting")
    node[parts[-1]] = yaml.safe_load(raw)


class RunConfig:
    """Validated settings for one pipeline run."""

    def __init__(self, data, base_dir="."):
        self.data = data
        self.base_dir = base_dir
        problems = []
        self._validate(problems)
        if problems:
            raise ConfigError(problems)

    @classmethod
    def load(cls, path=None, overrides=(), flag_values=None):
        data = copy.deepcopy(DEFAULTS)
        problems = []
        base_dir = "."
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    loaded = yaml.safe_load(fh) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
            except yaml.YAMLError as exc:
                raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
            if not isinstance(loaded, dict):
                raise ConfigError(f"config {path} must be a mapping")
            _merge(data, loaded, "", problems)
            base_dir = os.path.dirname(os.path.abspath(path))
        for o in overrides:
            try:
                apply_override(data, o)
            except ConfigError as exc:
                problems.extend(exc.problems)
        for key, value in (flag_values or {}).items():
            if value is not None:
                _set(data, key, value)
        if problems:
            raise ConfigError(problems)
        if os.environ.get(CACHE_ENV):
            data["paths"]["cache"] = os.environ[CACHE_ENV]
        return cls(data, base_dir)

    # ------------------------------------------------------------------
    def path(self, name):
        value = self.data["paths"].get(name)
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.normpath(os.path.join(self.base_dir, value))

    @property
    def output_dir(self):
        return self.path("output_dir")

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def channels(self):
        return list(self.data["channels"])

    @property
    def lags(self):
        return int(self.data["lags"])

    @property
    def ensemble_spec(self):
        e = self.data["ensemble"]
        return EnsembleSpec(k=int(e["k"]), l2_lambda=float(e["l2_lambda"]), var_floor=float(e["var_floor"]),
                            weights=tuple(float(w) / sum(e["weights"]) for w in e["weights"]),
                            tol=float(e["tol"]), max_iter=int(e["max_iter"]))

    @property
    def rolling(self):
        r = self.data["rolling"]
        return RollingConfig(float(r["train_fraction"]), int(r["step"]), r["window_mode"],
                             None if r["window"] is None else int(r["window"]), int(r["min_window"]))

    @property
    def periods(self):
        out = []
        for p in self.data["periods"]:
            start = date.fromisoformat(str(p["start"])) if p.get("start") else date.min
            end = date.fromisoformat(str(p["end"])) if p.get("end") else date.max
            out.append(PeriodSpec(str(p["name"]), start, end))
        return out

    @property
    def shap(self):
        return dict(self.data["shap"])

    def snapshot(self):
        """Config as recorded in the manifest; the output location is not part of it."""
        snap = copy.deepcopy(self.data)
        snap["paths"]["output_dir"] = "."
        return snap

    # ------------------------------------------------------------------
    def _validate(self, problems):
        d = self.data
        for key in ("bars", "news"):
            p = self.path(key)
            if p is None:
                problems.append(f"paths.{key}: required")
            elif not os.path.isfile(p):
                problems.append(f"paths.{key}: no such file {p}")
        for key in ("vectors", "lexicon", "cleaning_rules", "stopwords"):
            p = self.path(key)
            if p is not None and not os.path.isfile(p):
                problems.append(f"paths.{key}: no such file {p}")
        chans = d["channels"]
        if not isinstance(chans, list) or not chans:
            problems.append("channels: must be a non-empty list")
        else:
            for c in chans:
                if c not in CHANNELS or c == "har":
                    problems.append(f"channels: unknown news channel {c!r}")
            if "embedding" in chans and self.path("vectors") is None and not d.get("provider"):
                problems.append("channels: embedding needs paths.vectors or a provider")
        if not isinstance(d["lags"], int) or d["lags"] < 0:
            problems.append("lags: must be a non-negative integer")
        if not isinstance(d["interval_minutes"], int) or d["interval_minutes"] <= 0:
            problems.append("interval_minutes: must be a positive integer")
        if not isinstance(d["seed"], int):
            problems.append("seed: must be an integer")
        if not isinstance(d["n_jobs"], int) or d["n_jobs"] < 1:
            problems.append("n_jobs: must be a positive integer")
        e = d["ensemble"]
        if not isinstance(e["k"], int) or e["k"] < 1:
            problems.append("ensemble.k: must be a positive integer")
        if not isinstance(e["l2_lambda"], (int, float)) or e["l2_lambda"] < 0:
            problems.append("ensemble.l2_lambda: must be non-negative")
        if not isinstance(e["var_floor"], (int, float)) or e["var_floor"] <= 0:
            problems.append("ensemble.var_floor: must be positive")
        w = e["weights"]
        if (not isinstance(w, list) or len(w) != 3 or any(not isinstance(v, (int, float)) or v < 0 for v in w)
                or sum(w) <= 0):
            problems.append("ensemble.weights: need three non-negative numbers with a positive sum")
        r = d["rolling"]
        try:
            RollingConfig(float(r["train_fraction"]), int(r["step"]), r["window_mode"],
                          None if r["window"] is None else int(r["window"]), int(r["min_window"]))
        except (ValueError, TypeError, NewsVolError) as exc:
            problems.append(f"rolling: {exc}")
        s = d["shap"]
        if s["channel"] not in CHANNELS:
            problems.append(f"shap.channel: unknown channel {s['channel']!r}")
        if not isinstance(s["n_samples"], int) or s["n_samples"] < 2:
            problems.append("shap.n_samples: must be an integer >= 2")
        if not isinstance(s["background_size"], int) or s["background_size"] < 1:
            problems.append("shap.background_size: must be a positive integer")
        if s["mode"] not in ("auto", "exact", "sampled"):
            problems.append("shap.mode: must be auto, exact or sampled")
        try:
            validate_periods(self.periods)
        except (ValueError, TypeError, KeyError, NewsVolError) as exc:
            problems.append(f"periods: {exc}")
        prov = d.get("provider")
        if prov is not None:
            if not isinstance(prov, dict) or not prov.get("endpoint") or not prov.get("model_name"):
                problems.append("provider: needs endpoint and model_name")


def _set(data, key, value):
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node[p]
    node[parts[-1]] = value
