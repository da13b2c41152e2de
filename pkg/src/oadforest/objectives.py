"""Split costs: entropy, normalized-cut surrogate and group consistency.

All objectives are costs (lower is better).  The public functions score a
single explicit partition and are what the tests pin against hand-computed
values; the ``batch_*`` variants score many candidate partitions of one
node at once and are what the tree builder uses.
"""
from __future__ import annotations

import numpy as np
from scipy.special import xlogy

from .exceptions import DegenerateError
from .spectral import spectral_embedding

UNARY = "u"
PAIRWISE_S = "p_s"
PAIRWISE_T = "p_t"
HIGHER_S = "h_s"
HIGHER_T = "h_t"
OBJECTIVES = (UNARY, PAIRWISE_S, PAIRWISE_T, HIGHER_S, HIGHER_T)

# context subspace consulted by each non-unary objective
SUBSPACE = {PAIRWISE_S: "S", PAIRWISE_T: "T", HIGHER_S: "S", HIGHER_T: "T"}

# scores this close to the minimum count as ties; the first candidate wins,
# whatever the floating-point summation order
TIE_TOL = 1e-12


def first_minimum(scores, tol=TIE_TOL):
    """Index of the first score within ``tol`` (relative) of the minimum."""
    scores = np.asarray(scores)
    lo = scores.min()
    return int(np.flatnonzero(scores <= lo + tol * max(1.0, abs(lo)))[0])


def _entropy_cost(counts):
    """``-sum_y n_y log(n_y / N)`` along the last axis (natural log)."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    return xlogy(total, total) - xlogy(counts, counts).sum(axis=-1)


def _class_counts(labels, weights, classes):
    labels = np.asarray(labels)
    if weights is None:
        weights = np.ones(labels.shape[0])
    return np.array([np.sum(weights[labels == c]) for c in classes])


def objective_unary(left_labels, right_labels, left_weights=None, right_weights=None):
    """Summed class-entropy cost of the two children; empty children cost 0."""
    left_labels = np.asarray(left_labels)
    right_labels = np.asarray(right_labels)
    classes = np.union1d(left_labels, right_labels)
    left = _class_counts(left_labels, left_weights, classes)
    right = _class_counts(right_labels, right_weights, classes)
    return float(_entropy_cost(left) + _entropy_cost(right))


def _group_deviation(z, weights, squared):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] == 0:
        return 0.0
    if z.ndim == 1:
        z = z[:, None]
    w = np.ones(z.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    mean = (w[:, None] * z).sum(axis=0) / w.sum()
    d2 = ((z - mean) ** 2).sum(axis=1)
    return float(np.sum(w * (d2 if squared else np.sqrt(d2))))


def objective_higher(left_contexts, right_contexts, left_weights=None, right_weights=None,
                     squared=False):
    """Sum of each sample's L2 distance to its child's mean context.

    ``squared=True`` sums squared distances instead (variance reduction).
    """
    return (_group_deviation(left_contexts, left_weights, squared)
            + _group_deviation(right_contexts, right_weights, squared))


def embedding_spread(embedding, go_left, weights=None):
    """Within-child squared deviation of embedding values for one partition."""
    e = np.asarray(embedding, dtype=np.float64)
    mask = np.asarray(go_left, dtype=bool)
    w = np.ones_like(e) if weights is None else np.asarray(weights, dtype=np.float64)
    return float(batch_spread(e, mask[:, None], w)[0])


def objective_pairwise(features, contexts, candidates, weights=None):
    """Pick the candidate minimizing the normalized-cut surrogate.

    The Fiedler embedding of the context affinity graph is computed once;
    each candidate ``(gamma, t)`` is scored by the within-child squared
    deviation of embedding values.  Returns ``(best, best_score,
    reference_score)``, where the reference keeps every sample in one child.
    Raises :class:`DegenerateError` when the embedding is undefined.
    """
    X = np.asarray(features, dtype=np.float64)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    e = spectral_embedding(contexts).values
    gammas = np.array([c[0] for c in candidates], dtype=np.int64)
    ts = np.array([c[1] for c in candidates], dtype=np.float64)
    scores = batch_spread(e, X[:, gammas] <= ts, w)
    best = first_minimum(scores)
    return candidates[best], float(scores[best]), reference_spread(e, w)


# --------------------------------------------------------------------------
# batched scoring: ``go_left`` is an (m, K) boolean matrix, one column per
# candidate

def batch_unary(onehot_w, go_left):
    """Entropy cost per candidate; ``onehot_w`` is (m, C) weighted one-hot."""
    left = go_left.T.astype(np.float64) @ onehot_w
    right = onehot_w.sum(axis=0)[None, :] - left
    np.maximum(right, 0.0, out=right)
    return _entropy_cost(left) + _entropy_cost(right)


def reference_unary(onehot_w):
    return float(_entropy_cost(onehot_w.sum(axis=0)))


def batch_spread(e, go_left, w):
    """Within-child weighted squared deviation of a scalar embedding."""
    gl = go_left.astype(np.float64)
    we, we2 = w * e, w * e * e
    wl, sl = gl.T @ w, gl.T @ we
    wt, st, s2 = w.sum(), we.sum(), we2.sum()
    wr, sr = wt - wl, st - sl
    with np.errstate(divide="ignore", invalid="ignore"):
        left_term = np.where(wl > 0, sl * sl / wl, 0.0)
        right_term = np.where(wr > 1e-300, sr * sr / wr, 0.0)
    return s2 - left_term - right_term


def reference_spread(e, w):
    wt = w.sum()
    mean = (w * e).sum() / wt
    return float(np.sum(w * (e - mean) ** 2))


def batch_higher(z, w, go_left, squared=False, chunk_elems=4_000_000):
    """Group-consistency cost per candidate for contexts ``z`` (m, d)."""
    m, d = z.shape
    K = go_left.shape[1]
    gl = go_left.astype(np.float64)
    wz = w[:, None] * z
    wl = gl.T @ w
    wr = w.sum() - wl
    zl = gl.T @ wz
    zr = wz.sum(axis=0)[None, :] - zl
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_l = np.where(wl[:, None] > 0, zl / wl[:, None], 0.0)
        mean_r = np.where(wr[:, None] > 1e-300, zr / wr[:, None], 0.0)
    if squared:
        s2 = np.sum(w * np.sum(z * z, axis=1))
        return s2 - wl * np.sum(mean_l ** 2, axis=1) - wr * np.sum(mean_r ** 2, axis=1)
    out = np.empty(K)
    step = max(1, chunk_elems // max(1, m * d))
    for lo in range(0, K, step):
        hi = min(K, lo + step)
        mask = go_left[:, lo:hi]  # (m, k)
        # distance of every sample to the mean of the child it falls in
        means = np.where(mask.T[:, :, None], mean_l[lo:hi, None, :], mean_r[lo:hi, None, :])
        dist = np.sqrt(np.sum((z[None, :, :] - means) ** 2, axis=2))  # (k, m)
        out[lo:hi] = dist @ w
    return out


def reference_higher(z, w, squared=False):
    return _group_deviation(z, w, squared)


def node_embedding(contexts):
    """Fiedler values for a node's contexts, or ``None`` when degenerate."""
    if np.asarray(contexts).shape[0] < 3:
        return None
    try:
        return spectral_embedding(contexts).values
    except DegenerateError:
        return None
