"""Numeric inner loops, each with a numba and a numpy implementation.

The public names at the bottom of the module are bound to one of the two
variants according to :data:`newsvol._backend.BACKEND`. Both variants are kept
importable (``*_nb`` / ``*_np``) so tests and the benchmark can compare them.
"""

import math

import numpy as np

from ._backend import BACKEND, njit

_QUERY_CHUNK = 64


# --------------------------------------------------------------------------
# realized variance: sum of squares per contiguous segment
# --------------------------------------------------------------------------

@njit
def segment_sum_squares_nb(values, offsets):
    n_seg = offsets.shape[0] - 1
    out = np.zeros(n_seg)
    for s in range(n_seg):
        acc = 0.0
        for i in range(offsets[s], offsets[s + 1]):
            acc += values[i] * values[i]
        out[s] = acc
    return out


def segment_sum_squares_np(values, offsets):
    values = np.asarray(values, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    out = np.zeros(offsets.shape[0] - 1)
    nonempty = offsets[1:] > offsets[:-1]
    if values.size and nonempty.any():
        # reduceat misbehaves on empty segments, so only feed it non-empty starts
        out[nonempty] = np.add.reduceat(values * values, offsets[:-1][nonempty])
    return out


# --------------------------------------------------------------------------
# HAR windows: mean of the `window` values strictly before each index
# --------------------------------------------------------------------------

@njit
def trailing_mean_nb(x, window, start):
    n = x.shape[0]
    m = max(n - start, 0)
    out = np.empty(m)
    for j in range(m):
        t = start + j
        acc = 0.0
        for i in range(t - window, t):
            acc += x[i]
        out[j] = acc / window
    return out


def trailing_mean_np(x, window, start):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= start:
        return np.empty(0)
    windows = np.lib.stride_tricks.sliding_window_view(x, window)
    # window ending at t-1 starts at t-window
    return windows[start - window:n - window].mean(axis=1)


# --------------------------------------------------------------------------
# k nearest neighbours: class-1 frequency among the k closest rows
# --------------------------------------------------------------------------

@njit
def knn_proba_nb(train_x, train_y, queries, k):
    n, d = train_x.shape
    m = queries.shape[0]
    out = np.empty(m)
    best_d = np.empty(k)
    best_i = np.empty(k, dtype=np.int64)
    for q in range(m):
        filled = 0
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = train_x[i, j] - queries[q, j]
                acc += diff * diff
            # insertion into the sorted top-k; strict comparisons keep the lower index on ties
            if filled == k and acc >= best_d[k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and best_d[pos - 1] > acc:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = acc
            best_i[pos] = i
            if filled < k:
                filled += 1
        ones = 0
        for r in range(k):
            ones += train_y[best_i[r]]
        out[q] = ones / k
    return out


def knn_neighbors_np(train_x, queries, k):
    """Indices of the k nearest training rows per query, ties to lower index."""
    train_x = np.asarray(train_x, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for a in range(0, queries.shape[0], _QUERY_CHUNK):
        q = queries[a:a + _QUERY_CHUNK]
        diff = q[:, None, :] - train_x[None, :, :]
        dist = np.einsum("qnd,qnd->qn", diff, diff)
        out[a:a + _QUERY_CHUNK] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


def knn_proba_np(train_x, train_y, queries, k):
    idx = knn_neighbors_np(train_x, queries, k)
    return np.asarray(train_y, dtype=np.float64)[idx].mean(axis=1)


# --------------------------------------------------------------------------
# Gaussian naive Bayes joint log likelihood, shape (n_queries, n_classes)
# --------------------------------------------------------------------------

@njit
def nb_joint_log_likelihood_nb(queries, means, variances, log_priors):
    m, d = queries.shape
    c = means.shape[0]
    out = np.empty((m, c))
    log2pi = math.log(2.0 * math.pi)
    for q in range(m):
        for k in range(c):
            acc = log_priors[k]
            for j in range(d):
                diff = queries[q, j] - means[k, j]
                acc -= 0.5 * (log2pi + math.log(variances[k, j]) + diff * diff / variances[k, j])
            out[q, k] = acc
    return out


def nb_joint_log_likelihood_np(queries, means, variances, log_priors):
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    norm = -0.5 * np.sum(np.log(2.0 * np.pi * variances), axis=1)
    sq = ((queries[:, None, :] - means[None, :, :]) ** 2 / variances[None, :, :]).sum(axis=2)
    return log_priors[None, :] + norm[None, :] - 0.5 * sq


# --------------------------------------------------------------------------
# L2-penalised logistic regression: negative objective and its gradient
# --------------------------------------------------------------------------

@njit
def logistic_objective_nb(w, b, x, y, lam):
    n, d = x.shape
    loss = 0.0
    gw = np.zeros(d)
    gb = 0.0
    for i in range(n):
        z = b
        for j in range(d):
            z += x[i, j] * w[j]
        # log(1 + exp(z)) - y z, computed without overflow
        if z > 0:
            softplus = z + math.log1p(math.exp(-z))
            p = 1.0 / (1.0 + math.exp(-z))
        else:
            softplus = math.log1p(math.exp(z))
            ez = math.exp(z)
            p = ez / (1.0 + ez)
        loss += softplus - y[i] * z
        r = p - y[i]
        for j in range(d):
            gw[j] += r * x[i, j]
        gb += r
    for j in range(d):
        loss += 0.5 * lam * w[j] * w[j]
        gw[j] += lam * w[j]
    return loss, gw, gb


def logistic_objective_np(w, b, x, y, lam):
    z = x @ w + b
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * np.dot(w, w))
    p = np.exp(-np.logaddexp(0.0, -z))
    r = p - y
    return loss, x.T @ r + lam * w, float(r.sum())


if BACKEND == "numba":
    segment_sum_squares = segment_sum_squares_nb
    trailing_mean = trailing_mean_nb
    knn_proba = knn_proba_nb
    nb_joint_log_likelihood = nb_joint_log_likelihood_nb
    logistic_objective = logistic_objective_nb
else:
    segment_sum_squares = segment_sum_squares_np
    trailing_mean = trailing_mean_np
    knn_proba = knn_proba_np
    nb_joint_log_likelihood = nb_joint_log_likelihood_np
    logistic_objective = logistic_objective_np
