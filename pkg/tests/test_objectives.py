import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oadforest import objectives as obj
from oadforest.exceptions import DegenerateError
from oadforest.spectral import jacobi_eigh, mean_sigma, normalized_laplacian, pairwise_affinity

LN2 = math.log(2.0)


def brute_entropy(labels):
    n = len(labels)
    return -sum(labels.count(c) * math.log(labels.count(c) / n) for c in set(labels))


def brute_group(z):
    if not z:
        return 0.0
    z = np.atleast_2d(np.array(z, dtype=float).T).T
    mean = z.mean(axis=0)
    return float(sum(np.linalg.norm(row - mean) for row in z))


# --- unary -----------------------------------------------------------------

def test_unary_pure_children():
    assert obj.objective_unary(["A"] * 5, ["B"] * 2) == 0.0


def test_unary_hand_values():
    assert obj.objective_unary(list("AABB"), list("AAAA")) == pytest.approx(4 * LN2, abs=1e-10)
    assert obj.objective_unary(list("AAAABBBB"), []) == pytest.approx(8 * LN2, abs=1e-10)
    assert 4 * LN2 == pytest.approx(2.7726, abs=1e-4)
    assert 8 * LN2 == pytest.approx(5.5452, abs=1e-4)


def test_unary_weights_act_as_multiplicities():
    weighted = obj.objective_unary([0, 1], [1], np.array([3.0, 1.0]), np.array([2.0]))
    expanded = obj.objective_unary([0, 0, 0, 1], [1, 1])
    assert weighted == pytest.approx(expanded, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=30), st.data())
def test_batch_unary_matches_definition(labels, data):
    m = len(labels)
    go_left = np.array(data.draw(st.lists(st.booleans(), min_size=m, max_size=m)))
    onehot = np.eye(4)[labels]
    batch = obj.batch_unary(onehot, go_left[:, None])[0]
    left = [y for y, g in zip(labels, go_left) if g]
    right = [y for y, g in zip(labels, go_left) if not g]
    expected = (brute_entropy(left) if left else 0.0) + (brute_entropy(right) if right else 0.0)
    assert batch == pytest.approx(expected, abs=1e-9)
    assert obj.reference_unary(onehot) == pytest.approx(brute_entropy(labels), abs=1e-9)
    # splitting never raises entropy cost above the unsplit node
    assert batch <= obj.reference_unary(onehot) + 1e-9


# --- higher-order ------------------------------------------------------------

def test_higher_identical_children():
    assert obj.objective_higher([[1.0, 2.0]] * 3, [[5.0, 5.0]] * 2) == 0.0


def test_higher_hand_values():
    assert obj.objective_higher([0.0, 2.0], [10.0]) == pytest.approx(2.0, abs=1e-10)
    assert obj.objective_higher([0.0, 2.0, 10.0], []) == pytest.approx(12.0, abs=1e-10)


def test_higher_squared_variant():
    assert obj.objective_higher([0.0, 2.0], [10.0], squared=True) == pytest.approx(2.0, abs=1e-12)
    assert obj.objective_higher([0.0, 2.0, 10.0], [], squared=True) == pytest.approx(56.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 15), st.integers(1, 4), st.integers(0, 2**32 - 1), st.booleans())
def test_batch_higher_matches_definition(m, d, seed, squared):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(m, d))
    go_left = rng.random((m, 5)) < 0.5
    w = np.ones(m)
    batch = obj.batch_higher(z, w, go_left, squared, chunk_elems=7)
    for k in range(5):
        left, right = z[go_left[:, k]], z[~go_left[:, k]]
        if squared:
            expected = sum(float(np.sum((g - g.mean(axis=0)) ** 2)) for g in (left, right) if len(g))
        else:
            expected = brute_group(left.tolist()) + brute_group(right.tolist())
        assert batch[k] == pytest.approx(expected, abs=1e-9)
        assert batch[k] == pytest.approx(
            obj.objective_higher(left, right, squared=squared), abs=1e-9)


# --- pairwise -----------------------------------------------------------------

def oracle_embedding(contexts):
    """Fiedler vector through the Jacobi oracle, independent of the LAPACK path."""
    A = pairwise_affinity(contexts, mean_sigma(contexts))
    _, v = jacobi_eigh(normalized_laplacian(A))
    return v[:, 1]


def brute_spread(e, go_left):
    total = 0.0
    for part in (e[go_left], e[~go_left]):
        if part.size:
            total += float(np.sum((part - part.mean()) ** 2))
    return total


@pytest.fixture
def two_clusters():
    contexts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]])
    # feature 0 separates the clusters; feature 1 interleaves them
    X = np.array([[0.0, 1.0], [0.2, 4.0], [0.1, 6.0], [1.0, 2.0], [1.2, 5.0], [1.1, 3.0]])
    return X, contexts


def test_pairwise_prefers_cluster_separating_split(two_clusters):
    X, contexts = two_clusters
    candidates = [(1, 1.5), (1, 2.5), (1, 3.5), (1, 4.5), (1, 5.5), (0, 0.15), (0, 0.5), (0, 1.05)]
    best, score, reference = obj.objective_pairwise(X, contexts, candidates)
    assert best == (0, 0.5)

    e = oracle_embedding(contexts)
    brute = {c: brute_spread(e, X[:, c[0]] <= c[1]) for c in candidates}
    assert score == pytest.approx(brute[best], abs=1e-10)
    assert reference == pytest.approx(brute_spread(e, np.ones(6, dtype=bool)), abs=1e-10)
    assert all(brute[best] < brute[c] for c in candidates if c != best)


def test_embedding_spread_matches_brute_force(two_clusters):
    X, contexts = two_clusters
    e = oracle_embedding(contexts)
    mask = X[:, 1] <= 3.5
    assert obj.embedding_spread(e, mask) == pytest.approx(brute_spread(e, mask), abs=1e-12)


def test_pairwise_degenerate_contexts():
    X = np.arange(8.0).reshape(4, 2)
    with pytest.raises(DegenerateError):
        obj.objective_pairwise(X, np.ones((4, 3)), [(0, 1.0)])
    assert obj.node_embedding(np.ones((4, 3))) is None
    assert obj.node_embedding(np.arange(2.0)) is None


def test_pairwise_single_candidate_returned():
    rng = np.random.default_rng(5)
    X, contexts = rng.normal(size=(7, 3)), rng.normal(size=(7, 2))
    best, _, _ = obj.objective_pairwise(X, contexts, [(2, 0.0)])
    assert best == (2, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 20), st.integers(0, 2**32 - 1))
def test_batch_spread_weighted_matches_expansion(m, seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=m)
    w = rng.integers(1, 4, size=m).astype(float)
    go_left = rng.random((m, 4)) < 0.5
    expanded_e = np.repeat(e, w.astype(int))
    for k, score in enumerate(obj.batch_spread(e, go_left, w)):
        mask = np.repeat(go_left[:, k], w.astype(int))
        assert score == pytest.approx(brute_spread(expanded_e, mask), abs=1e-9)
    assert obj.reference_spread(e, w) == pytest.approx(
        brute_spread(expanded_e, np.ones(expanded_e.size, bool)), abs=1e-9)
