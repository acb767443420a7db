# src/fftcrystal/engine/cluster.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np

from ..config import FeedbackConstants
from ..errors import MembershipError
from ..spectral.topology import (PlaneDims, PoleLabel, TWO_PI, circular_mean, displacement_array, phase_pole_of,
                                 pole_of, wrapped_delta)
from ..spectral.transform import Axis, FeaturePoint
from .membrane import absorbs, absorption_rhs, feedback_mahalanobis, membrane_population, pull_from_mahalanobis

UNASSIGNED = -1

PointLike = Union[FeaturePoint, Sequence[float], np.ndarray]


def as_coords(x: PointLike) -> np.ndarray:
    if isinstance(x, FeaturePoint):
        return np.array([x.u, x.v, x.a], dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def _anchor_of(pts: np.ndarray, dims: Optional[PlaneDims], axis: Axis) -> np.ndarray:
    """First member on open axes, circular mean of the members on periodic ones."""
    anchor = pts[0].copy()
    if dims is not None:
        anchor[0] = circular_mean(pts[:, 0], dims.W)
        anchor[1] = circular_mean(pts[:, 1], dims.H)
    if axis == Axis.PHASE:
        anchor[2] = circular_mean(pts[:, 2], TWO_PI)
    return anchor


@dataclass(eq=False)
class Cluster:
    """
    One crystal. Members are kept with their displacement from a fixed anchor
    (wrapped on periodic axes), and the per-axis sums of those displacements and
    of their squares give mu and sigma in O(1) per absorb/release. The right side
    of the absorption criterion is cached and refreshed with every change.

    sigma is held between sigma_floor and the optional per-axis sigma_ceiling.
    """
    id: int
    anchor: np.ndarray
    k: FeedbackConstants
    sigma_floor: float
    dims: Optional[PlaneDims]
    axis: Axis = Axis.MAGNITUDE
    sigma_ceiling: Optional[np.ndarray] = None
    sums: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sumsq: np.ndarray = field(default_factory=lambda: np.zeros(3))
    offsets: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    mu: np.ndarray = field(init=False)
    sigma: np.ndarray = field(init=False)
    pole: PoleLabel = field(init=False)
    rhs: float = field(init=False)

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64).copy()
        self.sums = np.asarray(self.sums, dtype=np.float64).copy()
        self.sumsq = np.asarray(self.sumsq, dtype=np.float64).copy()
        if self.sigma_ceiling is not None:
            self.sigma_ceiling = np.maximum(np.asarray(self.sigma_ceiling, dtype=np.float64), self.sigma_floor)
        self._refresh()

    # ---------------- construction ----------------

    @classmethod
    def from_members(cls, id: int, coords: np.ndarray, idx: np.ndarray, k: FeedbackConstants,
                     sigma_floor: float, dims: Optional[PlaneDims], axis: Axis,
                     anchor: Optional[np.ndarray] = None,
                     sigma_ceiling: Optional[np.ndarray] = None) -> "Cluster":
        idx = np.asarray(idx, dtype=np.int64)
        pts = coords[idx]
        if anchor is None:
            anchor = _anchor_of(pts, dims, axis)
        offs = displacement_array(pts, anchor, dims, axis)
        return cls(id=id, anchor=anchor, k=k, sigma_floor=sigma_floor, dims=dims, axis=axis,
                   sigma_ceiling=sigma_ceiling, sums=offs.sum(axis=0), sumsq=(offs ** 2).sum(axis=0),
                   offsets=dict(zip(idx.tolist(), offs)))

    # ---------------- state ----------------

    @property
    def members(self):
        return self.offsets.keys()

    @property
    def N(self) -> int:
        return len(self.offsets)

    def _refresh(self) -> None:
        n = self.N
        if n == 0:
            mean = np.zeros(3)
            var = np.zeros(3)
        else:
            mean = self.sums / n
            var = np.clip(self.sumsq / n - mean ** 2, 0.0, None)
        sigma = np.maximum(np.sqrt(var), self.sigma_floor)
        if self.sigma_ceiling is not None:
            sigma = np.minimum(sigma, self.sigma_ceiling)
        self.sigma = sigma
        mu = self.anchor + mean
        if self.dims is not None:
            mu[0] = self.dims.wrap_u(mu[0])
            mu[1] = self.dims.wrap_v(mu[1])
        if self.axis == Axis.PHASE:
            # principal value in (-pi, pi]
            mu[2] = -wrapped_delta(-mu[2], 0.0, TWO_PI)
        self.mu = mu
        if self.axis == Axis.PHASE:
            self.pole = phase_pole_of(float(mu[2]))
        elif self.dims is not None:
            self.pole = pole_of(float(mu[0]), float(mu[1]), self.dims)
        else:
            self.pole = PoleLabel.ZERO
        self.rhs = float(absorption_rhs(self.k, self.sigma))

    def absorb(self, x: PointLike, idx: int) -> "Cluster":
        if idx in self.offsets:
            raise MembershipError(f"point {idx} already belongs to cluster {self.id}")
        off = displacement_array(as_coords(x), self.anchor, self.dims, self.axis)
        self.offsets[idx] = off
        self.sums += off
        self.sumsq += off ** 2
        self._refresh()
        return self

    def release(self, idx: int) -> "Cluster":
        off = self.offsets.get(idx)
        if off is None:
            raise MembershipError(f"point {idx} is not a member of cluster {self.id}")
        if self.N < 2:
            raise MembershipError(f"cannot release the last member of cluster {self.id}; delete the cluster instead")
        del self.offsets[idx]
        self.sums -= off
        self.sumsq -= off ** 2
        self._refresh()
        return self

    def population(self, epsilon) -> float:
        return float(membrane_population(self.N, self.sigma, self.k, epsilon))


# ---------------- point vs cluster ----------------

def _mahalanobis(x: PointLike, c: Cluster, dims: Optional[PlaneDims], axis: Optional[Axis]) -> float:
    delta = displacement_array(as_coords(x), c.mu, c.dims if dims is None else dims, c.axis if axis is None else axis)
    return float(feedback_mahalanobis(delta, c.k, c.sigma))


def outsider_pull(x: PointLike, c: Cluster, dims: Optional[PlaneDims] = None, axis: Optional[Axis] = None) -> float:
    """Pull a free point exerts on the centroid; +inf when it sits on the centroid."""
    return pull_from_mahalanobis(_mahalanobis(x, c, dims, axis))


def absorption_test(x: PointLike, c: Cluster, dims: Optional[PlaneDims] = None, axis: Optional[Axis] = None) -> bool:
    return bool(absorbs(_mahalanobis(x, c, dims, axis), c.rhs))


def snapshot(clusters: Sequence[Cluster]):
    """Frozen (ids, mu, sigma, rhs) arrays of a cluster list, in list order."""
    if not clusters:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 3)), np.ones((0, 3)), np.zeros(0)
    ids = np.array([c.id for c in clusters], dtype=np.int64)
    mus = np.stack([c.mu for c in clusters])
    sigmas = np.stack([c.sigma for c in clusters])
    rhs = np.array([c.rhs for c in clusters])
    return ids, mus, sigmas, rhs
