import numpy as np
import pytest

from oadforest.detector import OnlineActionDetector
from oadforest.forest import ContextForestClassifier
from oadforest.streams import SynthConfig, iter_synthetic

SMALL = SynthConfig(n_classes=3, n_joints=4, segments_per_stream=4, context_dim=6, seed=11)


def split_triples(triples):
    streams, contexts, truths = zip(*triples)
    return list(streams), list(contexts), list(truths)


@pytest.fixture(scope="session")
def small_data():
    train = list(iter_synthetic(SMALL, 2))
    test = list(iter_synthetic(SMALL.replace(seed=12), 2))
    return train, test


@pytest.fixture(scope="session")
def small_model(small_data):
    train, _ = small_data
    streams, contexts, truths = split_triples(train)
    forest = ContextForestClassifier(n_trees=4, mode="rf+st", random_state=3)
    return OnlineActionDetector(forest).fit(streams, truths, contexts)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
