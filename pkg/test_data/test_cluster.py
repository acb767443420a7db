import math

import numpy as np
import pytest

from fftcrystal.config import FeedbackConstants
from fftcrystal.engine.cluster import Cluster, absorption_test, outsider_pull, snapshot
from fftcrystal.engine.membrane import absorption_rhs, membrane_population
from fftcrystal.errors import MembershipError
from fftcrystal.spectral.topology import PlaneDims, PoleLabel, torus_distance
from fftcrystal.spectral.transform import Axis, Channel, FeaturePoint

K = FeedbackConstants()
FLOOR = 1e-3


def _cluster(coords, dims=None, axis=Axis.MAGNITUDE, k=K, idx=None):
    coords = np.asarray(coords, dtype=np.float64)
    idx = np.arange(len(coords)) if idx is None else idx
    return Cluster.from_members(0, coords, idx, k, FLOOR, dims, axis)


def test_three_points_match_batch_statistics():
    coords = np.array([[1.0, 2.0, 3.0], [4.0, -1.0, 0.5], [-2.0, 0.0, 2.0]])
    c = _cluster(coords)
    np.testing.assert_allclose(c.mu, coords.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(c.sigma, coords.std(axis=0), atol=1e-12)
    assert c.N == 3
    assert set(c.members) == {0, 1, 2}


def test_absorb_then_release_restores_state(rng):
    coords = rng.normal(size=(20, 3)) * [3.0, 2.0, 0.5]
    c = _cluster(coords, idx=np.arange(10))
    mu, sigma, rhs = c.mu.copy(), c.sigma.copy(), c.rhs
    for i in range(10, 20):
        c.absorb(coords[i], i)
    for i in range(10, 20):
        c.release(i)
    np.testing.assert_allclose(c.mu, mu, atol=1e-9)
    np.testing.assert_allclose(c.sigma, sigma, atol=1e-9)
    assert c.rhs == pytest.approx(rhs, rel=1e-9)


def test_absorbing_the_centroid_keeps_it():
    coords = np.array([[0.0, 0.0, 1.0], [2.0, 2.0, 3.0]])
    c = _cluster(coords)
    c.absorb(c.mu.copy(), 2)
    np.testing.assert_allclose(c.mu, [1.0, 1.0, 2.0], atol=1e-12)


def test_incremental_matches_rebuild(rng):
    coords = rng.normal(size=(30, 3))
    c = _cluster(coords, idx=[0])
    for i in range(1, 30):
        c.absorb(FeaturePoint(u=coords[i, 0], v=coords[i, 1], a=coords[i, 2], channel=Channel.GRAY,
                              source_index=i), i)
    np.testing.assert_allclose(c.mu, coords.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(c.sigma, coords.std(axis=0), atol=1e-12)


def test_membership_errors():
    c = _cluster(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))
    with pytest.raises(MembershipError):
        c.absorb(np.zeros(3), 0)
    with pytest.raises(MembershipError):
        c.release(7)
    c.release(1)
    with pytest.raises(MembershipError):
        c.release(0)


def test_sigma_floor_applies_to_single_point():
    c = _cluster(np.array([[1.0, 1.0, 1.0]]))
    np.testing.assert_array_equal(c.sigma, [FLOOR, FLOOR, FLOOR])
    assert c.rhs > 0


def test_cached_rhs_follows_every_change(rng):
    coords = rng.normal(size=(12, 3))
    c = _cluster(coords, idx=np.arange(4))
    for i in range(4, 12):
        c.absorb(coords[i], i)
        assert c.rhs == pytest.approx(float(absorption_rhs(K, c.sigma)), rel=1e-12)
    c.release(5)
    assert c.rhs == pytest.approx(float(absorption_rhs(K, c.sigma)), rel=1e-12)


def test_population_uses_live_statistics():
    c = _cluster(np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]]))
    eps = (0.1, 0.1, 0.1)
    assert c.population(eps) == pytest.approx(float(membrane_population(2, c.sigma, K, eps)))


# ---------------- wrap ----------------

def test_cluster_spanning_the_corners():
    dims = PlaneDims(W=8, H=8)
    coords = np.array([[-4, -4, 1.0], [3, 3, 1.0], [-4, 3, 1.0], [3, -4, 1.0]])
    c = _cluster(coords, dims=dims)
    np.testing.assert_allclose(c.sigma[:2], [0.5, 0.5], atol=1e-12)
    assert torus_distance(c.mu[0], c.mu[1], -4, -4, dims) == pytest.approx(math.sqrt(0.5))
    assert -4 <= c.mu[0] < 4 and -4 <= c.mu[1] < 4
    assert c.pole == PoleLabel.INFINITY


def test_wide_cluster_statistics_do_not_depend_on_member_order(rng):
    dims = PlaneDims(W=16, H=16)
    u = np.arange(-7, 8, dtype=np.float64)
    coords = np.stack([u, np.zeros_like(u), np.ones_like(u)], axis=1)
    for order in (np.arange(len(u)), np.roll(np.arange(len(u)), -14), rng.permutation(len(u))):
        c = _cluster(coords[order], dims=dims)
        assert c.mu[0] == pytest.approx(0.0, abs=1e-9)
        assert c.sigma[0] == pytest.approx(u.std(), abs=1e-9)
        assert c.pole == PoleLabel.ZERO


def test_dc_cluster_is_pole_zero():
    dims = PlaneDims(W=8, H=8)
    c = _cluster(np.array([[0, 0, 5.0], [1, 0, 4.0], [0, -1, 4.5]]), dims=dims)
    assert c.pole == PoleLabel.ZERO


def test_phase_cluster_straddling_pi():
    coords = np.array([[0.0, 0.0, 3.1], [0.0, 0.0, -3.1]])
    c = _cluster(coords, dims=PlaneDims(W=8, H=8), axis=Axis.PHASE)
    assert abs(abs(c.mu[2]) - math.pi) < 1e-9
    assert -math.pi < c.mu[2] <= math.pi
    assert c.sigma[2] == pytest.approx(math.pi - 3.1, abs=1e-9)
    assert c.pole == PoleLabel.ZERO


def test_phase_cluster_near_half_pi_is_infinity():
    coords = np.array([[0.0, 0.0, 1.5], [0.0, 0.0, 1.6]])
    c = _cluster(coords, dims=PlaneDims(W=8, H=8), axis=Axis.PHASE)
    assert c.pole == PoleLabel.INFINITY


# ---------------- point tests ----------------

def test_pull_and_absorption_against_cluster():
    unit = FeedbackConstants(k1=1, k2=1, k3=1)
    coords = np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
    c = _cluster(coords, k=unit)
    np.testing.assert_allclose(c.sigma, np.ones(3))
    assert outsider_pull(c.mu, c) == math.inf
    assert absorption_test(c.mu, c)
    assert outsider_pull(np.array([1.0, 0.0, 0.0]), c) == pytest.approx(1.0)
    assert absorption_test(np.ones(3), c)
    assert not absorption_test(np.full(3, 1.5), c)


def test_snapshot_order():
    a = Cluster.from_members(3, np.zeros((1, 3)), [0], K, FLOOR, None, Axis.MAGNITUDE)
    b = Cluster.from_members(7, np.ones((1, 3)), [0], K, FLOOR, None, Axis.MAGNITUDE)
    ids, mus, sigmas, rhs = snapshot([a, b])
    assert ids.tolist() == [3, 7]
    np.testing.assert_array_equal(mus[1], np.ones(3))
    assert snapshot([])[0].size == 0
