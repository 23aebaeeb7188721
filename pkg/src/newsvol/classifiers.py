"""KNN, Gaussian naive Bayes and logistic regression combined by soft voting."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, DegenerateTrainingError, FormatError, InsufficientDataError
from .features import Standardizer

MODEL_FORMAT_VERSION = 1
TIE_TOLERANCE = 1e-12


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def _check_binary(y):
    y = np.asarray(y)
    classes = set(np.unique(y).tolist())
    if not classes <= {0, 1}:
        raise ContractError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    return y.astype(np.float64)


def _as_2d(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1, -1) if x.ndim == 1 else x


def _two_column(p1):
    p1 = np.clip(p1, 0.0, 1.0)
    return np.column_stack((1.0 - p1, p1))


# --------------------------------------------------------------------------
# logistic regression
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2_lambda: float
    converged: bool = False
    n_iter: int = 0
    loss_history: tuple = ()

    def predict_proba(self, x):
        return _two_column(sigmoid(_as_2d(x) @ self.weights + self.bias))

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias, "l2_lambda": self.l2_lambda,
                "converged": self.converged, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], dtype=np.float64), float(d["bias"]), float(d["l2_lambda"]),
                   bool(d["converged"]), int(d["n_iter"]))


def logistic_objective(w, b, x, y, l2_lambda):
    """Negative penalised log-likelihood and its gradient ``(loss, grad_w, grad_b)``.

    The penalty ``l2_lambda / 2 * |w|^2`` leaves the bias unpenalised.
    """
    return kernels.logistic_objective(
        np.ascontiguousarray(w, dtype=np.float64), float(b),
        np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64),
        float(l2_lambda),
    )


def _newton_direction(w, b, x, y, gw, gb, l2_lambda):
    p = sigmoid(x @ w + b)
    curv = p * (1.0 - p)
    d = x.shape[1]
    hess = np.empty((d + 1, d + 1))
    hess[:d, :d] = (x * curv[:, None]).T @ x + l2_lambda * np.eye(d)
    hess[:d, d] = hess[d, :d] = x.T @ curv
    hess[d, d] = curv.sum()
    grad = np.append(gw, gb)
    try:
        step = np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError:
        step = np.linalg.lstsq(hess, grad, rcond=None)[0]
    if not np.all(np.isfinite(step)) or np.dot(step, grad) <= 0.0:
        step = grad  # fall back to steepest descent
    return step[:d], step[d]


def _gradient_direction(w, b, x, y, gw, gb, l2_lambda):
    return gw, gb


SOLVERS = {"newton": _newton_direction, "gradient": _gradient_direction}


def fit_logistic(x, y, l2_lambda=1.0, tol=1e-6, max_iter=1000, solver="newton"):
    """Minimise the penalised negative log-likelihood with Armijo backtracking.

    ``solver="newton"`` steps along the Newton direction and usually stops
    within ten iterations; ``"gradient"`` takes plain steepest-descent steps.
    Iteration stops once the largest gradient component drops below ``tol``.
    """
    if solver not in SOLVERS:
        raise ContractError(f"unknown solver {solver!r}")
    direction = SOLVERS[solver]
    x = np.ascontiguousarray(_as_2d(x))
    if x.shape[0] < 2:
        raise InsufficientDataError("logistic regression needs at least 2 rows")
    y = np.ascontiguousarray(_check_binary(y))
    w = np.zeros(x.shape[1])
    b = 0.0
    loss, gw, gb = logistic_objective(w, b, x, y, l2_lambda)
    history = [loss]
    # curvature bound of the objective gives a safe first gradient step
    step = 1.0 / (0.25 * (np.sum(x * x) + x.shape[0]) + l2_lambda)
    converged = False
    it = 0
    while True:
        gnorm = max(np.max(np.abs(gw)) if gw.size else 0.0, abs(gb))
        if gnorm < tol:
            converged = True
            break
        if it == max_iter:
            break
        dw, db = direction(w, b, x, y, gw, gb, l2_lambda)
        slope = float(np.dot(dw, gw) + db * gb)
        t = 1.0 if solver == "newton" else step * 2.0
        while True:
            new_loss, new_gw, new_gb = logistic_objective(w - t * dw, b - t * db, x, y, l2_lambda)
            if new_loss <= loss - 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if new_loss > loss:
            break
        step = t
        it += 1
        w, b, loss, gw, gb = w - t * dw, b - t * db, new_loss, new_gw, new_gb
        history.append(loss)
    return LogisticModel(w, float(b), float(l2_lambda), converged, it, tuple(history))


# --------------------------------------------------------------------------
# Gaussian naive Bayes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianNbModel:
    priors: np.ndarray
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)
    var_floor: float

    def joint_log_likelihood(self, x):
        return kernels.nb_joint_log_likelihood(
            np.ascontiguousarray(_as_2d(x)), self.means, self.variances, np.log(self.priors))

    def predict_proba(self, x):
        jll = self.joint_log_likelihood(x)
        top = jll.max(axis=1, keepdims=True)
        log_norm = top + np.log(np.exp(jll - top).sum(axis=1, keepdims=True))
        return np.exp(jll - log_norm)

    def to_dict(self):
        return {"priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "var_floor": self.var_floor}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in ("priors", "means", "variances")),
                   float(d["var_floor"]))


def fit_gaussian_nb(x, y, var_floor=1e-9):
    x = _as_2d(x)
    y = _check_binary(y)
    priors, means, variances = [], [], []
    for c in (0.0, 1.0):
        rows = x[y == c]
        priors.append(rows.shape[0] / x.shape[0])
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), var_floor))
    return GaussianNbModel(np.array(priors), np.vstack(means), np.vstack(variances), float(var_floor))


def nb_predict_proba(model, x):
    return model.predict_proba(x)


# --------------------------------------------------------------------------
# k nearest neighbours
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ContractError("k must be positive")
        if self.k > self.train_x.shape[0]:
            raise ContractError(f"k={self.k} exceeds {self.train_x.shape[0]} training rows")

    def predict_proba(self, x):
        p1 = kernels.knn_proba(self.train_x, self.train_y, np.ascontiguousarray(_as_2d(x)), self.k)
        return _two_column(p1)

    def to_dict(self):
        return {"train_x": self.train_x.tolist(), "train_y": self.train_y.tolist(), "k": self.k}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["train_x"], dtype=np.float64), np.asarray(d["train_y"], dtype=np.int64), int(d["k"]))


def fit_knn(x, y, k=5):
    return KnnModel(np.ascontiguousarray(_as_2d(x)), np.ascontiguousarray(y, dtype=np.int64), int(k))


def knn_predict_proba(model, x):
    return model.predict_proba(x)


# --------------------------------------------------------------------------
# soft voting
# --------------------------------------------------------------------------

def _normalized_weights(weights, n):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ContractError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or w.sum() <= 0:
        raise ContractError("weights must be non-negative with a positive sum")
    return w / w.sum()


def soft_vote(member_probas, weights=None):
    """Weighted mean of class-probability vectors and its argmax.

    Returns ``(label, aggregated)``. Classes whose aggregated probability is
    within ``TIE_TOLERANCE`` of the maximum count as tied and the lowest
    class index wins.
    """
    probas = [np.asarray(p, dtype=np.float64) for p in member_probas]
    if not probas:
        raise ContractError("soft_vote needs at least one member")
    if len({p.shape for p in probas}) != 1 or probas[0].ndim != 1:
        raise ContractError("member probability vectors must share one length")
    w = _normalized_weights(np.ones(len(probas)) if weights is None else weights, len(probas))
    aggregated = w @ np.vstack(probas)
    label = int(np.flatnonzero(aggregated >= aggregated.max() - TIE_TOLERANCE)[0])
    return label, aggregated


def soft_vote_batch(member_probas, weights):
    """Vectorised :func:`soft_vote` over rows; ``member_probas`` is (members, rows, classes)."""
    stacked = np.asarray(member_probas, dtype=np.float64)
    w = _normalized_weights(weights, stacked.shape[0])
    aggregated = np.tensordot(w, stacked, axes=1)
    best = aggregated.max(axis=1, keepdims=True)
    labels = np.argmax(aggregated >= best - TIE_TOLERANCE, axis=1)
    return labels, aggregated


# --------------------------------------------------------------------------
# ensemble
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    k: int = 5
    l2_lambda: float = 1.0
    var_floor: float = 1e-9
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    tol: float = 1e-6
    max_iter: int = 1000

    def describe(self):
        return (f"knn_k={self.k} lr_l2_lambda={self.l2_lambda} nb_var_floor={self.var_floor} "
                f"vote_weights={','.join(f'{w:.6g}' for w in self.weights)}")


@dataclass(frozen=True)
class FittedEnsemble:
    members: tuple  # (KnnModel, GaussianNbModel, LogisticModel)
    weights: np.ndarray
    standardizer: Standardizer = field(default=None)

    def __post_init__(self):
        if len(self.weights) != len(self.members):
            raise ContractError("one weight per member is required")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ContractError("ensemble weights must sum to 1")

    def _prepare(self, x):
        x = _as_2d(x)
        return self.standardizer.apply(x) if self.standardizer is not None else x

    def member_probas(self, x):
        z = np.ascontiguousarray(self._prepare(x))
        return np.stack([m.predict_proba(z) for m in self.members])

    def predict_proba(self, x):
        return soft_vote_batch(self.member_probas(x), self.weights)[1]

    def predict(self, x):
        return soft_vote_batch(self.member_probas(x), self.weights)[0]

    def to_json(self):
        knn, nb, lr = self.members
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "weights": self.weights.tolist(),
            "standardizer": self.standardizer.to_dict() if self.standardizer is not None else None,
            "knn": knn.to_dict(), "nb": nb.to_dict(), "lr": lr.to_dict(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise FormatError(f"unsupported model format {d.get('format_version')!r}")
        std = Standardizer.from_dict(d["standardizer"]) if d["standardizer"] is not None else None
        members = (KnnModel.from_dict(d["knn"]), GaussianNbModel.from_dict(d["nb"]), LogisticModel.from_dict(d["lr"]))
        return cls(members, np.asarray(d["weights"], dtype=np.float64), std)


def fit_ensemble(x, y, spec=None, standardize=True):
    """Fit the standardizer and the three members on the same training rows."""
    spec = spec or EnsembleSpec()
    x = _as_2d(x)
    _check_binary(y)
    std = Standardizer.fit(x) if standardize else None
    z = np.ascontiguousarray(std.apply(x) if std is not None else x)
    members = (
        fit_knn(z, y, spec.k),
        fit_gaussian_nb(z, y, spec.var_floor),
        fit_logistic(z, y, spec.l2_lambda, spec.tol, spec.max_iter),
    )
    return FittedEnsemble(members, _normalized_weights(spec.weights, 3), std)

