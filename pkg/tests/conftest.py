import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from delala.dataset import pairwise_distances  # noqa: E402
from delala.leading_forest import NO_PARENT, LeadingForest, layers, tree_ids  # noqa: E402

TWO_BLOBS = np.array([0.0, 0.1, 0.2, 10.0, 10.1, 10.2])[:, None]


@pytest.fixture
def two_blobs():
    """Six 1-D points in two well separated triples, with the blob id as label."""
    return TWO_BLOBS.copy(), np.array([1, 1, 1, 2, 2, 2])


@pytest.fixture
def two_blob_dist(two_blobs):
    return pairwise_distances(two_blobs[0])


@pytest.fixture(autouse=True)
def _quiet_kpca():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="kernel PCA")
        yield


def random_dataset(rng, n=None, d=None, classes=None, duplicates=True):
    """Gaussian blobs with optional duplicated rows; returns (X, labels)."""
    n = int(rng.integers(4, 301)) if n is None else n
    d = int(rng.integers(1, 6)) if d is None else d
    C = int(rng.integers(1, 5)) if classes is None else classes
    centers = rng.normal(scale=4.0, size=(C, d))
    y = rng.integers(0, C, size=n)
    X = centers[y] + rng.normal(size=(n, d))
    if duplicates and n > 3 and rng.random() < 0.3:
        k = int(rng.integers(1, max(2, n // 10)))
        src = rng.integers(0, n, size=k)
        dst = rng.integers(0, n, size=k)
        X[dst] = X[src]
        y[dst] = y[src]
    return X, y + 1


def make_forest(parent, rho, dist):
    """Forest record from explicit parent links; roots ordered by density."""
    parent = np.asarray(parent)
    rho = np.asarray(rho, dtype=float)
    dist = np.asarray(dist, dtype=float)
    roots = np.flatnonzero(parent == NO_PARENT)
    roots = roots[np.argsort(-rho[roots], kind="stable")]
    delta = np.array([dist[i, p] if p != NO_PARENT else dist.max() for i, p in enumerate(parent)])
    return LeadingForest(rho, parent, delta, rho * delta, layers(parent), tree_ids(parent, roots),
                         roots, int(roots[0]))
