"""Growing and traversing single context-guided decision trees.

A node draws random ``(feature, threshold)`` candidates over the skeleton
features only, samples one split objective, and keeps the best candidate
if it improves on the reference split that sends every sample left.
Contexts steer the choice of split but never appear in a split test.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import objectives as obj
from .exceptions import DegenerateError, InputError

MODES = {
    "rf": {obj.UNARY: 1.0},
    "rf+t": {obj.UNARY: 1.0, obj.PAIRWISE_T: 1.0, obj.HIGHER_T: 1.0},
    "rf+st": {o: 1.0 for o in obj.OBJECTIVES},
}

# mean_loc stored in leaves when no temporal context was available
UNINFORMED_LOC = 0.5


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 100
    min_samples: int = 1
    n_candidates: int = 64
    objective_weights: dict = field(default_factory=lambda: dict(MODES["rf+st"]))
    m_max: int = 256
    deriv_lag: int = 1
    seed: int = 0
    exhaustive: bool = False
    squared_higher: bool = False
    gain_epsilon: float = 1e-12
    max_candidate_draws: int = 10

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "n_candidates", "m_max", "deriv_lag"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be a positive integer")
        if self.min_samples < 1:
            raise InputError("min_samples must be >= 1")
        weights = {k: float(v) for k, v in dict(self.objective_weights).items() if float(v) != 0.0}
        unknown = set(weights) - set(obj.OBJECTIVES)
        if unknown:
            raise InputError(f"unknown objectives {sorted(unknown)}")
        if any(v < 0 for v in weights.values()) or not weights:
            raise InputError("objective weights must be non-negative and not all zero")
        object.__setattr__(self, "objective_weights", weights)

    @property
    def uses_spatial(self):
        return any(obj.SUBSPACE.get(o) == "S" for o in self.objective_weights)

    @property
    def uses_temporal(self):
        return any(obj.SUBSPACE.get(o) == "T" for o in self.objective_weights)


@dataclass(frozen=True)
class LeafStats:
    class_dist: np.ndarray
    mean_loc: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    gamma: int
    t: float
    left: object
    right: object


@dataclass(frozen=True)
class Leaf:
    stats: LeafStats


@dataclass
class NodeDecision:
    is_leaf: bool
    gamma: int = -1
    t: float = 0.0
    go_left: np.ndarray = None
    gain: float = 0.0
    objective: str = None
    fallback: bool = False


class Comparisons:
    """Counter for split tests executed during traversal."""

    def __init__(self):
        self.count = 0


def leaf_statistics(labels, n_classes, temporal=None, weights=None):
    """Weighted class distribution and mean temporal location of a leaf.

    ``labels`` are class indices in ``range(n_classes)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise InputError("a leaf needs at least one sample")
    w = np.ones(labels.size) if weights is None else np.asarray(weights, dtype=np.float64)
    dist = np.bincount(labels, weights=w, minlength=n_classes).astype(np.float64)
    dist /= dist.sum()
    if temporal is None:
        loc = UNINFORMED_LOC
    else:
        loc = float(np.clip(np.sum(w * np.asarray(temporal)) / w.sum(), 0.0, 1.0))
    return LeafStats(dist, loc, int(round(w.sum())))


def generate_candidates(X, n_candidates, rng, max_draws=10):
    """Random ``(gamma, t)`` tests with ``t`` strictly inside feature ``gamma``'s range.

    Draws that would send every sample one way are discarded and redrawn,
    up to ``max_draws * n_candidates`` draws in total.  Returned candidates
    are sorted by ``(gamma, t)``.  Raises :class:`DegenerateError` when all
    features are constant over ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise DegenerateError("fewer than two samples")
    lo, hi = X.min(axis=0), X.max(axis=0)
    if not np.any(hi > lo):
        raise DegenerateError("all features are constant over the node")
    d = X.shape[1]
    gammas, ts = [], []
    budget = max_draws * n_candidates
    drawn = 0
    while len(gammas) < n_candidates and drawn < budget:
        k = min(n_candidates - len(gammas), budget - drawn)
        g = rng.integers(0, d, size=k)
        u = rng.random(size=k)
        t = lo[g] + u * (hi[g] - lo[g])
        keep = (t > lo[g]) & (t < hi[g])
        gammas.extend(g[keep].tolist())
        ts.extend(t[keep].tolist())
        drawn += k
    return _canonical(np.array(gammas, dtype=np.int64), np.array(ts, dtype=np.float64))


def exhaustive_candidates(X):
    """Every feature paired with every midpoint between consecutive observed values."""
    X = np.asarray(X, dtype=np.float64)
    gammas, ts = [], []
    for g in range(X.shape[1]):
        v = np.unique(X[:, g])
        mids = 0.5 * (v[1:] + v[:-1])
        gammas.append(np.full(mids.size, g))
        ts.append(mids)
    if not gammas or sum(m.size for m in ts) == 0:
        raise DegenerateError("all features are constant over the node")
    return _canonical(np.concatenate(gammas).astype(np.int64), np.concatenate(ts))


def _canonical(gammas, ts):
    order = np.lexsort((ts, gammas))
    return gammas[order], ts[order]


class TreeBuilder:
    """Grows one tree over a fixed training set.

    ``y`` holds class indices ``0..n_classes-1``; ``weights`` are per-row
    multiplicities (bootstrap draws); ``spatial``/``temporal`` are the
    training-only contexts and may be ``None`` when unused.
    """

    def __init__(self, X, y, n_classes, params, weights=None, spatial=None, temporal=None):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.n_classes = int(n_classes)
        self.params = params
        self.w = np.ones(self.X.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        self.spatial = None if spatial is None else np.asarray(spatial, dtype=np.float64)
        self.temporal = None if temporal is None else np.asarray(temporal, dtype=np.float64)
        if params.uses_spatial and self.spatial is None:
            raise InputError("the objective mix needs spatial contexts")
        if params.uses_temporal and self.temporal is None:
            raise InputError("the objective mix needs temporal contexts")
        names = sorted(params.objective_weights)
        p = np.array([params.objective_weights[n] for n in names])
        self._objective_names = names
        self._objective_p = p / p.sum()

    def _contexts(self, subspace, idx):
        if subspace == "S":
            return self.spatial[idx]
        return self.temporal[idx][:, None]

    def leaf(self, idx):
        temporal = None if self.temporal is None else self.temporal[idx]
        return leaf_statistics(self.y[idx], self.n_classes, temporal, self.w[idx])

    def train_node(self, idx, depth, rng):
        """Decide whether the node holding rows ``idx`` splits, and how."""
        params = self.params
        if depth >= params.max_depth or idx.size <= params.min_samples:
            return NodeDecision(True)
        Xn = self.X[idx]
        try:
            if params.exhaustive:
                gammas, ts = exhaustive_candidates(Xn)
            else:
                gammas, ts = generate_candidates(Xn, params.n_candidates, rng,
                                                 params.max_candidate_draws)
        except DegenerateError:
            return NodeDecision(True)
        if gammas.size == 0:
            return NodeDecision(True)
        objective = self._objective_names[int(rng.choice(len(self._objective_names),
                                                         p=self._objective_p))]
        go_left = Xn[:, gammas] <= ts
        w = self.w[idx]

        fallback = False
        scores = reference = None
        if objective in (obj.PAIRWISE_S, obj.PAIRWISE_T):
            sub = np.arange(idx.size)
            if idx.size > params.m_max:
                sub = np.sort(rng.choice(idx.size, params.m_max, replace=False))
            e = obj.node_embedding(self._contexts(obj.SUBSPACE[objective], idx[sub]))
            if e is None:
                fallback = True
            else:
                scores = obj.batch_spread(e, go_left[sub], w[sub])
                reference = obj.reference_spread(e, w[sub])
        elif objective in (obj.HIGHER_S, obj.HIGHER_T):
            z = self._contexts(obj.SUBSPACE[objective], idx)
            scores = obj.batch_higher(z, w, go_left, params.squared_higher)
            reference = obj.reference_higher(z, w, params.squared_higher)
        if objective == obj.UNARY or fallback:
            onehot = np.zeros((idx.size, self.n_classes))
            onehot[np.arange(idx.size), self.y[idx]] = w
            scores = obj.batch_unary(onehot, go_left)
            reference = obj.reference_unary(onehot)

        best = obj.first_minimum(scores)
        gain = reference - float(scores[best])
        if not gain > params.gain_epsilon:
            return NodeDecision(True, gain=gain, objective=objective, fallback=fallback)
        return NodeDecision(False, int(gammas[best]), float(ts[best]), go_left[:, best],
                            gain, objective, fallback)

    def build(self, seed_seq, rows=None):
        """Grow a tree from rows ``rows`` (all rows by default)."""
        idx = np.arange(self.X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
        if idx.size == 0:
            raise InputError("cannot grow a tree from an empty sample set")
        nodes = _NodeArrays(self.n_classes)
        self._grow(nodes, idx, 0, seed_seq, ())
        return nodes.finish()

    def _grow(self, nodes, idx, depth, seed_seq, path):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key + path)))
        decision = self.train_node(idx, depth, rng)
        node_id = nodes.add()
        if decision.is_leaf:
            nodes.set_leaf(node_id, self.leaf(idx))
            return node_id
        left = self._grow(nodes, idx[decision.go_left], depth + 1, seed_seq, path + (0,))
        right = self._grow(nodes, idx[~decision.go_left], depth + 1, seed_seq, path + (1,))
        nodes.set_split(node_id, decision.gamma, decision.t, left, right)
        return node_id


class _NodeArrays:
    def __init__(self, n_classes):
        self.n_classes = n_classes
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.mean_loc, self.n_samples = [], [], []

    def add(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(None)
        self.mean_loc.append(0.0)
        self.n_samples.append(0)
        return len(self.feature) - 1

    def set_leaf(self, i, stats):
        self.value[i] = stats.class_dist
        self.mean_loc[i] = stats.mean_loc
        self.n_samples[i] = stats.n_samples

    def set_split(self, i, gamma, t, left, right):
        self.feature[i], self.threshold[i] = gamma, t
        self.left[i], self.right[i] = left, right

    def finish(self):
        value = np.zeros((len(self.value), self.n_classes))
        for i, v in enumerate(self.value):
            if v is not None:
                value[i] = v
        return Tree(np.array(self.feature, dtype=np.int64), np.array(self.threshold),
                    np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64),
                    value, np.array(self.mean_loc), np.array(self.n_samples, dtype=np.int64))


class Tree:
    """Array form of a binary tree; node 0 is the root, nodes in preorder.

    Leaves have ``left == right == -1`` and carry ``value`` (class
    distribution), ``mean_loc`` and ``n_samples``.
    """

    def __init__(self, feature, threshold, left, right, value, mean_loc, n_samples):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.mean_loc = np.asarray(mean_loc, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        # python lists make the per-frame scalar walk several times faster
        self._f = self.feature.tolist()
        self._t = self.threshold.tolist()
        self._l = self.left.tolist()
        self._r = self.right.tolist()

    @property
    def n_nodes(self):
        return self.feature.size

    @property
    def is_leaf(self):
        return self.left < 0

    @property
    def n_leaves(self):
        return int(np.sum(self.is_leaf))

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaf_stats(self, node):
        return LeafStats(self.value[node].copy(), float(self.mean_loc[node]), int(self.n_samples[node]))

    def leaf_index(self, x, counter=None):
        f, t, left, right = self._f, self._t, self._l, self._r
        node = 0
        steps = 0
        while left[node] >= 0:
            node = left[node] if x[f[node]] <= t[node] else right[node]
            steps += 1
        if counter is not None:
            counter.count += steps
        return node

    def traverse(self, x, counter=None):
        """Leaf statistics reached by feature vector ``x``; ties go left."""
        x = np.asarray(x, dtype=np.float64)
        return self.leaf_stats(self.leaf_index(x.tolist(), counter))

    def apply(self, X):
        """Leaf node id for every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.left[node[active]] >= 0]
        return node

    def to_nested(self, node=0):
        if self.left[node] < 0:
            return Leaf(self.leaf_stats(node))
        return Split(int(self.feature[node]), float(self.threshold[node]),
                     self.to_nested(int(self.left[node])), self.to_nested(int(self.right[node])))

    def equals(self, other):
        return (self.n_nodes == other.n_nodes
                and np.array_equal(self.feature, other.feature)
                and np.array_equal(self.threshold, other.threshold)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and np.array_equal(self.value, other.value)
                and np.array_equal(self.mean_loc, other.mean_loc)
                and np.array_equal(self.n_samples, other.n_samples))
