"""Rolling one-step-ahead evaluation, weighted classification metrics and McNemar tests."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date

import numpy as np

from .classifiers import EnsembleSpec, fit_ensemble
from .errors import ContractError, InsufficientDataError, ValidationError

EXACT_THRESHOLD = 25


@dataclass(frozen=True)
class RollingConfig:
    train_fraction: float = 0.8
    step: int = 1
    window_mode: str = "sliding"  # or "expanding"
    window: int = None  # explicit length; overrides train_fraction
    min_window: int = 30

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.step < 1:
            raise ValidationError("step must be a positive number of rows")
        if self.window_mode not in ("sliding", "expanding"):
            raise ValidationError(f"unknown window_mode {self.window_mode!r}")
        if self.window is not None and self.window < 1:
            raise ValidationError("window must be positive")

    def window_length(self, n_rows):
        w = self.window if self.window is not None else int(math.floor(self.train_fraction * n_rows))
        if w < self.min_window:
            raise InsufficientDataError(f"training window of {w} rows is below the minimum {self.min_window}")
        if n_rows < w + 1:
            raise InsufficientDataError(f"{n_rows} rows cannot fill a {w}-row window plus one test day")
        return w

    def schedule(self, n_rows):
        """``[(train_start, train_stop, test_index), ...]`` in date order."""
        w = self.window_length(n_rows)
        out = []
        for i in range(w, n_rows, self.step):
            start = i - w if self.window_mode == "sliding" else 0
            out.append((start, i, i))
        return out


@dataclass(frozen=True)
class PredictionLog:
    dates: tuple
    predicted: np.ndarray
    actual: np.ndarray
    proba1: np.ndarray

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("prediction log dates must be strictly increasing")
        if not (len(self.dates) == len(self.predicted) == len(self.actual) == len(self.proba1)):
            raise ValidationError("prediction log columns differ in length")

    def __len__(self):
        return len(self.dates)

    @property
    def correct(self):
        return self.predicted == self.actual


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    support: dict
    averaging: str = "weighted"

    def as_dict(self):
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "support": {str(k): v for k, v in self.support.items()},
                "averaging": self.averaging}


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    p_value: float
    mode: str  # "exact" or "chi2_cc"
    statistic: float = None
    p_exact: float = None
    statistic_cc: float = None
    p_chi2_cc: float = None
    degenerate: bool = False

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("b", "c", "mode", "statistic", "p_value", "p_exact", "statistic_cc", "p_chi2_cc", "degenerate")}


# --------------------------------------------------------------------------
# rolling evaluation
# --------------------------------------------------------------------------

def fit_window(dataset, start, stop, spec):
    return fit_ensemble(dataset.X[start:stop], dataset.y[start:stop], spec)


def rolling_eval(dataset, spec=None, config=None, n_jobs=1):
    """Refit standardizer and ensemble on each trailing window, predict the next row.

    Windows are independent, so ``n_jobs > 1`` fits them on a thread pool;
    the log is always assembled in date order.
    """
    spec = spec or EnsembleSpec()
    config = config or RollingConfig()
    plan = config.schedule(len(dataset))

    def one(job):
        start, stop, test = job
        model = fit_window(dataset, start, stop, spec)
        proba = model.predict_proba(dataset.X[test:test + 1])[0]
        label = model.predict(dataset.X[test:test + 1])[0]
        return int(label), float(proba[1])

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, plan))
    else:
        results = [one(job) for job in plan]
    tests = [t for _, _, t in plan]
    return PredictionLog(
        tuple(dataset.dates[t] for t in tests),
        np.array([r[0] for r in results], dtype=np.int64),
        dataset.y[tests].astype(np.int64),
        np.array([r[1] for r in results], dtype=np.float64),
    )


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def classification_metrics(log):
    """Accuracy plus support-weighted precision, recall and F1 over classes 0 and 1."""
    if len(log) == 0:
        raise InsufficientDataError("cannot score an empty prediction log")
    pred = np.asarray(log.predicted)
    act = np.asarray(log.actual)
    n = len(act)
    precision = recall = f1 = 0.0
    support = {}
    for cls in (0, 1):
        tp = int(np.sum((pred == cls) & (act == cls)))
        n_pred = int(np.sum(pred == cls))
        n_true = int(np.sum(act == cls))
        support[cls] = n_true
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_true if n_true else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        weight = n_true / n
        precision += weight * p
        recall += weight * r
        f1 += weight * f
    accuracy = float(np.mean(pred == act))
    return MetricsReport(accuracy, precision, recall, f1, support)


# --------------------------------------------------------------------------
# McNemar
# --------------------------------------------------------------------------

def exact_binomial_p(b, c):
    """Two-sided exact McNemar p: ``min(1, 2 * P[Bin(b+c, 1/2) <= min(b, c)])``."""
    n = b + c
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, k) for k in range(min(b, c) + 1))
    return min(1.0, 2.0 * tail / 2.0 ** n)


def chi2_1_sf(x):
    """Survival function of the chi-square distribution with one degree of freedom."""
    return math.erfc(math.sqrt(x / 2.0)) if x > 0 else 1.0


def mcnemar_counts(b, c):
    if b < 0 or c < 0:
        raise ContractError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return McNemarResult(0, 0, 1.0, "exact", None, 1.0, None, None, degenerate=True)
    p_exact = exact_binomial_p(b, c)
    stat = (abs(b - c) - 1) ** 2 / n
    p_chi = chi2_1_sf(stat)
    if n < EXACT_THRESHOLD:
        return McNemarResult(b, c, p_exact, "exact", None, p_exact, stat, p_chi)
    return McNemarResult(b, c, p_chi, "chi2_cc", stat, p_exact, stat, p_chi)


def mcnemar(log_a, log_b):
    """Paired test on the days where exactly one of the two models is right.

    ``b`` counts days A got right and B wrong, ``c`` the reverse.
    """
    if tuple(log_a.dates) != tuple(log_b.dates):
        raise ContractError("McNemar needs both logs over identical dates")
    ca, cb = log_a.correct, log_b.correct
    return mcnemar_counts(int(np.sum(ca & ~cb)), int(np.sum(~ca & cb)))


# --------------------------------------------------------------------------
# text formats
# --------------------------------------------------------------------------

def write_prediction_csv(log, stream, header_lines=()):
    for line in header_lines:
        stream.write(f"# {line}\n")
    stream.write("date,predicted,actual,proba1\n")
    for d, p, a, q in zip(log.dates, log.predicted.tolist(), log.actual.tolist(), log.proba1.tolist()):
        stream.write(f"{d.isoformat()},{p},{a},{q!r}\n")


def read_prediction_csv(stream):
    dates, pred, act, proba = [], [], [], []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("date,"):
            continue
        d, p, a, q = line.split(",")
        dates.append(date.fromisoformat(d))
        pred.append(int(p))
        act.append(int(a))
        proba.append(float(q))
    return PredictionLog(tuple(dates), np.array(pred, dtype=np.int64), np.array(act, dtype=np.int64),
                         np.array(proba, dtype=np.float64))


def metrics_table(reports, header_lines=()):
    """CSV rows ``model,accuracy,precision,recall,f1`` in the given model order."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("model,accuracy,precision,recall,f1")
    for name, r in reports.items():
        lines.append(f"{name},{r.accuracy:.4f},{r.precision:.4f},{r.recall:.4f},{r.f1:.4f}")
    return "\n".join(lines) + "\n"


def mcnemar_table(names, results, header_lines=()):
    """Lower-triangle CSV of p-values; ``results[(a, b)]`` holds the test of a against b."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("model," + ",".join(names))
    for i, a in enumerate(names):
        cells = []
        for j, b in enumerate(names):
            if j < i:
                r = results.get((a, b)) or results.get((b, a))
                cells.append(f"{r.p_value:.4f}" if r is not None else "")
            else:
                cells.append("")
        lines.append(a + "," + ",".join(cells))
    return "\n".join(lines) + "\n"
