"""Shared fixtures: a small deterministic dataset and a tiny synthetic world.

Session chains in these fixtures run far shorter than the defaults; the
tests that depend on the default chain settings build their own configs.
"""

import numpy as np
import pytest

from elicit.dataset import Dataset
from elicit.evaluation import synthetic_world
from elicit.prediction import SamplerConfig
from elicit.session import SessionConfig


@pytest.fixture
def tiny_records():
    return [
        {"id": "p1", "keywords": ["alpha", "beta"], "target": 3.0, "category": "x"},
        {"id": "p2", "keywords": ["beta"], "target": 1.0, "category": "y"},
        {"id": "p3", "keywords": ["alpha", "gamma", "alpha"], "target": 5.0, "category": "x"},
        {"id": "p4", "keywords": ["gamma"], "target": 2.0, "category": "y"},
    ]


@pytest.fixture
def small_train():
    rng = np.random.default_rng(3)
    X = (rng.random((24, 8)) < 0.5).astype(float)
    w = rng.normal(0.0, 1.0, 8)
    y = X @ w + rng.normal(0.0, 0.2, 24)
    return Dataset(
        feature_names=tuple(f"f{j}" for j in range(8)),
        X=X,
        y=y,
        categories=tuple("ab"[i % 2] for i in range(24)),
    )


@pytest.fixture(scope="session")
def world():
    # small enough that a full create/query/feedback cycle runs in seconds
    return synthetic_world(
        40, 60, 6, 1.0, seed=5, aux_docs=200, n_clusters=8, cluster_sample=200
    )


@pytest.fixture(scope="session")
def fast_session_config():
    return SessionConfig(
        max_iterations=3,
        batch_size=5,
        sampler=SamplerConfig(n_iter=400, burn_in=200),
    )
