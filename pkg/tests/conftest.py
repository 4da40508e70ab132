import numpy as np
import pytest

from aura.anomaly import AnomalyDetector
from aura.domain import default_taxonomy
from aura.fleetsim.corpus import generate_corpus

NOMINAL_BASE = np.array([400.0, 400.0, 400.0, 16.0, 35.0, 30.0, 0.0])
NOMINAL_NOISE = np.array([0.5, 0.5, 0.5, 0.2, 0.3, 0.3, 0.02])


def nominal_stream(rng, length=240):
    return NOMINAL_BASE + rng.normal(0, 1, size=(length, 7)) * NOMINAL_NOISE


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


@pytest.fixture(scope="session")
def nominal_streams():
    rng = np.random.default_rng(0)
    return [nominal_stream(rng) for _ in range(20)]


@pytest.fixture(scope="session")
def detector(nominal_streams):
    det = AnomalyDetector(seed=3)
    det.fit(nominal_streams)
    return det


@pytest.fixture(scope="session")
def corpus_small():
    return generate_corpus(300, seed=11)
