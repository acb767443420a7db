from __future__ import annotations

import numpy as np
import pytest

from fftcrystal.config import EngineParams, FeedbackConstants
from fftcrystal.engine.cluster import Cluster
from fftcrystal.engine.fit import Clustering
from fftcrystal.imaging import corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def engine():
    """Default engine with a shorter pass limit; a 16x16 plane is a single tile."""
    return small_grid_engine()


@pytest.fixture
def unit_k():
    return FeedbackConstants(k1=1.0, k2=1.0, k3=1.0)


@pytest.fixture
def blob_engine(unit_k):
    return EngineParams(k=unit_k, allow_any_feedback=True, seed_count=8, density_bins=8, rng_seed=5)


@pytest.fixture(scope="session")
def scene16():
    return corpus.scene(size=16)


@pytest.fixture(scope="session")
def scene32():
    return corpus.scene(size=32)


def small_grid_engine(**kw) -> EngineParams:
    return EngineParams(**{"max_iterations": 30, "density_bins": 2, **kw})


def clustering_from_labels(cloud, labels, params: EngineParams = EngineParams()) -> Clustering:
    """A Clustering built straight from a label vector, bypassing the fit loop."""
    coords = cloud.coords()
    labels = np.asarray(labels, dtype=np.int64)
    clusters = tuple(
        Cluster.from_members(int(cid), coords, np.flatnonzero(labels == cid), params.k, params.sigma_floor,
                             cloud.dims, cloud.axis)
        for cid in np.unique(labels[labels >= 0])
    )
    return Clustering(clusters=clusters, assignment=labels, iterations_used=1, converged=True, dims=cloud.dims,
                      axis=cloud.axis, channel=cloud.channel, source_index=cloud.source_index)


def dft2_centered(img: np.ndarray) -> np.ndarray:
    """Direct O(N^2) DFT, laid out with DC at [H//2, W//2]."""
    H, W = img.shape
    u = np.arange(W) - W // 2
    v = np.arange(H) - H // 2
    ex = np.exp(-2j * np.pi * np.outer(u, np.arange(W)) / W)
    ey = np.exp(-2j * np.pi * np.outer(v, np.arange(H)) / H)
    return ey @ img @ ex.T


def brute_torus_distance(p, q, W, H) -> float:
    """Minimum plain distance over the nine translated copies of q."""
    best = np.inf
    for du in (-W, 0, W):
        for dv in (-H, 0, H):
            best = min(best, float(np.hypot(p[0] - q[0] - du, p[1] - q[1] - dv)))
    return best
