"""Context-guided random forest classifier."""
from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InputError
from .tree import MODES, Comparisons, ForestParams, TreeBuilder


def rebalanced_bootstrap(labels, rng, n_draws=None):
    """Bootstrap indices drawn with probability inversely proportional to class size.

    Every class present receives the same expected share of the draws; with
    a single class this is ordinary bagging.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n == 0:
        raise InputError("cannot bootstrap an empty sample set")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    pdf = 1.0 / counts[inverse]
    cdf = np.cumsum(pdf)
    u = rng.random(n if n_draws is None else n_draws) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)


def _grow_tree(X, y, n_classes, params, spatial, temporal, seed_seq, bootstrap):
    boot_seq, node_seq = seed_seq.spawn(2)
    if bootstrap:
        rng = np.random.Generator(np.random.PCG64(boot_seq))
        draws = np.bincount(rebalanced_bootstrap(y, rng), minlength=y.size)
        rows = np.flatnonzero(draws)
        weights = draws.astype(np.float64)
    else:
        rows = np.arange(y.size)
        weights = None
    builder = TreeBuilder(X, y, n_classes, params, weights, spatial, temporal)
    return builder.build(node_seq, rows)


class ContextForestClassifier(ClassifierMixin, BaseEstimator):
    """Random forest whose splits are chosen with help from training-only contexts.

    Split tests look only at ``X``.  During ``fit``, each node samples one
    objective from ``objective_weights`` (or the preset named by ``mode``):
    class entropy, a normalized-cut surrogate on spatial or temporal
    contexts, or a group-consistency cost on either context.

    Parameters
    ----------
    n_trees : int
        Number of trees.
    max_depth : int
        Nodes at this depth become leaves.
    min_samples : int
        Nodes holding this many distinct rows or fewer become leaves.
    n_candidates : int
        Random split tests drawn per node.
    mode : {"rf", "rf+t", "rf+st"}
        Objective preset: entropy only, entropy plus the two temporal
        objectives, or all five objectives with equal weight.
    objective_weights : dict, optional
        Explicit sampling weights over ``{"u", "p_s", "p_t", "h_s", "h_t"}``;
        overrides ``mode``.
    m_max : int
        Cap on the node size fed to the spectral embedding.
    exhaustive : bool
        Score every feature/midpoint pair instead of random candidates.
    squared_higher : bool
        Use squared distances in the group-consistency objective.
    bootstrap : bool
        Grow each tree from a class-rebalanced bootstrap sample.
    random_state : int
        Seed of the per-tree, per-node generator hierarchy.
    n_jobs : int, optional
        Trees grown in parallel; results do not depend on it.
    """

    def __init__(self, n_trees=50, max_depth=100, min_samples=1, n_candidates=64,
                 mode="rf+st", objective_weights=None, m_max=256, exhaustive=False,
                 squared_higher=False, bootstrap=True, gain_epsilon=1e-12,
                 random_state=0, n_jobs=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples = min_samples
        self.n_candidates = n_candidates
        self.mode = mode
        self.objective_weights = objective_weights
        self.m_max = m_max
        self.exhaustive = exhaustive
        self.squared_higher = squared_higher
        self.bootstrap = bootstrap
        self.gain_epsilon = gain_epsilon
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _params(self):
        if self.objective_weights is not None:
            weights = dict(self.objective_weights)
        elif self.mode in MODES:
            weights = dict(MODES[self.mode])
        else:
            raise InputError(f"unknown mode {self.mode!r}; expected one of {sorted(MODES)}")
        return ForestParams(n_trees=self.n_trees, max_depth=self.max_depth,
                            min_samples=self.min_samples, n_candidates=self.n_candidates,
                            objective_weights=weights, m_max=self.m_max,
                            seed=0 if self.random_state is None else self.random_state,
                            exhaustive=self.exhaustive, squared_higher=self.squared_higher,
                            gain_epsilon=self.gain_epsilon)

    def fit(self, X, y, spatial_context=None, temporal_context=None):
        X, y = check_X_y(X, y)
        params = self._params()
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        spatial = temporal = None
        if spatial_context is not None:
            spatial = check_array(spatial_context)
            if spatial.shape[0] != X.shape[0]:
                raise InputError("spatial_context must have one row per sample")
        if temporal_context is not None:
            temporal = np.asarray(temporal_context, dtype=np.float64).ravel()
            if temporal.shape[0] != X.shape[0]:
                raise InputError("temporal_context must have one value per sample")
            if np.any((temporal < 0) | (temporal > 1)):
                raise InputError("temporal_context values must lie in [0, 1]")

        root = np.random.SeedSequence(self.random_state)
        seeds = root.spawn(params.n_trees)
        n_classes = self.classes_.size
        jobs = (delayed(_grow_tree)(X, y_idx, n_classes, params, spatial, temporal, s,
                                    self.bootstrap) for s in seeds)
        if self.n_jobs in (None, 1):
            trees = [fn(*a, **kw) for fn, a, kw in jobs]
        else:
            trees = Parallel(n_jobs=self.n_jobs)(jobs)
        self.n_features_in_ = X.shape[1]
        self.params_ = params
        self._set_trees(trees)
        return self

    def _set_trees(self, trees):
        if not trees:
            raise InputError("a forest needs at least one tree")
        self.estimators_ = list(trees)
        self.offsets_ = np.cumsum([0] + [t.n_nodes for t in trees])[:-1]
        self._values = np.vstack([t.value for t in trees])
        self._locs = np.concatenate([t.mean_loc for t in trees])
        self._walkers = [(t.leaf_index, int(o)) for t, o in zip(trees, self.offsets_)]

    def truncated(self, n_trees):
        """Copy restricted to the first ``n_trees`` trees (same seeds as a smaller forest)."""
        check_is_fitted(self)
        clone = self.__class__(**self.get_params())
        clone.set_params(n_trees=n_trees)
        clone.classes_ = self.classes_
        clone.n_features_in_ = self.n_features_in_
        clone.params_ = self.params_
        clone._set_trees(self.estimators_[:n_trees])
        return clone

    @property
    def max_tree_depth(self):
        return max(t.depth for t in self.estimators_)

    def _check_X(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"X has {X.shape[1]} features, the forest was trained on {self.n_features_in_}")
        return X

    def _leaf_ids(self, X):
        return np.stack([t.apply(X) + o for t, o in zip(self.estimators_, self.offsets_)], axis=1)

    def predict_proba(self, X):
        ids = self._leaf_ids(self._check_X(X))
        return self._values[ids].mean(axis=1)

    def predict_loc(self, X):
        """Average leaf temporal location estimate per row."""
        ids = self._leaf_ids(self._check_X(X))
        return self._locs[ids].mean(axis=1)

    def predict_proba_loc(self, X):
        ids = self._leaf_ids(self._check_X(X))
        return self._values[ids].mean(axis=1), self._locs[ids].mean(axis=1)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def frame_stats(self, x, counter=None):
        """Averaged ``(class_dist, mean_loc)`` for one feature vector.

        Scalar fast path used by the online detector.
        """
        check_is_fitted(self)
        if len(x) != self.n_features_in_:
            raise InputError(f"feature vector has {len(x)} entries, expected {self.n_features_in_}")
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        ids = [walk(xs, counter) + off for walk, off in self._walkers]
        return self._values[ids].mean(axis=0), float(self._locs[ids].mean())


def traverse(tree, x, counter=None):
    """Leaf statistics reached by ``x`` in ``tree``."""
    return tree.traverse(x, counter)


__all__ = ["ContextForestClassifier", "rebalanced_bootstrap", "traverse", "Comparisons"]
