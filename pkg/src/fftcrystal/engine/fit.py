# src/fftcrystal/engine/fit.py
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.ndimage import maximum_filter

from ..config import EngineParams
from ..errors import InvalidInputError
from ..spectral.topology import TWO_PI, PlaneDims, displacement_array
from ..spectral.transform import Axis, Channel, FeaturePoint, PointCloud
from .cluster import UNASSIGNED, Cluster, snapshot
from .membrane import feedback_mahalanobis, membrane_radius, pull_from_mahalanobis

logger = logging.getLogger("fftcrystal.engine")

# points per block when scoring a pass
CHUNK = 8192

DUMP_COLUMNS = ["cluster_id", "mu_u", "mu_v", "mu_a", "sigma_u", "sigma_v", "sigma_a", "n", "pole"]

Points = Union[PointCloud, Sequence[FeaturePoint], np.ndarray]


@dataclass(frozen=True, eq=False)
class Clustering:
    clusters: Tuple[Cluster, ...]
    assignment: np.ndarray
    iterations_used: int
    converged: bool
    dims: Optional[PlaneDims]
    axis: Axis
    channel: Channel
    source_index: np.ndarray

    def __post_init__(self):
        for name in ("assignment", "source_index"):
            arr = np.array(getattr(self, name), dtype=np.int64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def cluster_by_id(self) -> Dict[int, Cluster]:
        return {c.id: c for c in self.clusters}

    @property
    def unassigned_count(self) -> int:
        return int(np.count_nonzero(self.assignment == UNASSIGNED))

    def labels(self) -> np.ndarray:
        """(H, W) grid of cluster ids, UNASSIGNED where a cell joined nothing."""
        if self.dims is None:
            raise InvalidInputError("clustering was fit on a free-space cloud; it has no grid")
        grid = np.full(self.dims.W * self.dims.H, UNASSIGNED, dtype=np.int64)
        grid[self.source_index] = self.assignment
        return grid.reshape(self.dims.shape)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            [c.id, *c.mu.tolist(), *c.sigma.tolist(), c.N, c.pole.value]
            for c in self.clusters
        ]
        df = pd.DataFrame(rows, columns=DUMP_COLUMNS)
        return df.astype({"cluster_id": "int64", "n": "int64"})

    def dump_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


# ---------------- input ----------------

def _coords_of(points: Points) -> Tuple[np.ndarray, np.ndarray, Optional[PlaneDims], Axis, Channel]:
    if isinstance(points, PointCloud):
        return points.coords(), points.source_index, points.dims, points.axis, points.channel
    if isinstance(points, np.ndarray):
        coords = np.asarray(points, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise InvalidInputError(f"point coordinates must have shape (P, 3), got {coords.shape}")
        return coords, np.arange(len(coords)), None, Axis.MAGNITUDE, Channel.GRAY
    pts = list(points)
    coords = np.array([[p.u, p.v, p.a] for p in pts], dtype=np.float64).reshape(-1, 3)
    src = np.array([p.source_index for p in pts], dtype=np.int64)
    channel = pts[0].channel if pts else Channel.GRAY
    return coords, src, None, Axis.MAGNITUDE, channel


# ---------------- seeding ----------------

def _axis_bins(values: np.ndarray, nb: int, lo: float, span: float) -> np.ndarray:
    if span <= 0:
        return np.zeros(len(values), dtype=np.int64)
    b = np.floor((values - lo) * nb / span).astype(np.int64)
    return np.clip(b, 0, nb - 1)


def _bin_points(coords: np.ndarray, nb: int, axis: Axis):
    cols, modes = [], []
    for i in range(3):
        x = coords[:, i]
        if i == 2 and axis == Axis.PHASE:
            cols.append(_axis_bins(x, nb, -np.pi, TWO_PI))
            modes.append("wrap")
        else:
            lo, hi = float(x.min()), float(x.max())
            # max lands in the last bin
            cols.append(_axis_bins(x, nb, lo, (hi - lo) * (1 + 1e-12)))
            modes.append("constant")
    return np.ravel_multi_index(tuple(cols), (nb, nb, nb)), modes


def _density_seeds(coords: np.ndarray, params: EngineParams, axis: Axis) -> List[np.ndarray]:
    """Member index arrays of the densest local maxima of a binned cloud, most populated first."""
    nb = params.density_bins
    flat, modes = _bin_points(coords, nb, axis)
    counts = np.bincount(flat, minlength=nb ** 3).reshape(nb, nb, nb)
    peaks = (counts == maximum_filter(counts, size=3, mode=modes, cval=0)) & (counts > 0)
    peak_bins = np.flatnonzero(peaks.ravel())

    rng = np.random.default_rng(params.rng_seed)
    peak_bins = peak_bins[rng.permutation(len(peak_bins))]
    order = np.argsort(-counts.ravel()[peak_bins], kind="stable")
    chosen = peak_bins[order][: params.seed_count]
    return [np.flatnonzero(flat == b) for b in chosen]


def tile_counts(dims: PlaneDims, params: EngineParams) -> Tuple[int, int]:
    """Tiles per frequency axis, at least one."""
    return max(1, round(dims.W / params.tile_size)), max(1, round(dims.H / params.tile_size))


def tile_of(x, period: int, n: int) -> np.ndarray:
    # halves round to even, so tile_of(-x) == -tile_of(x) mod n
    return np.mod(np.round(np.asarray(x, dtype=np.float64) * n / period), n).astype(np.int64)


def _tile_seeds(coords: np.ndarray, params: EngineParams, dims: PlaneDims) -> List[np.ndarray]:
    """One seed per tile of a DC-centred lattice, in row-major tile order."""
    nu, nv = tile_counts(dims, params)
    tiles = tile_of(coords[:, 1], dims.H, nv) * nu + tile_of(coords[:, 0], dims.W, nu)
    members = (np.flatnonzero(tiles == t) for t in range(nu * nv))
    return [idx for idx in members if len(idx)]


def sigma_ceiling(dims: Optional[PlaneDims], params: EngineParams) -> Optional[np.ndarray]:
    """Spread of one evenly filled tile on each frequency axis; None off the plane."""
    if dims is None:
        return None
    nu, nv = tile_counts(dims, params)
    return np.array([dims.W / nu / math.sqrt(12.0), dims.H / nv / math.sqrt(12.0), np.inf])


# ---------------- passes ----------------

def _best_admitting(coords: np.ndarray, clusters: Sequence[Cluster], kk: np.ndarray,
                    dims: Optional[PlaneDims], axis: Axis) -> np.ndarray:
    """Per point: id of the admitting cluster with the largest pull, or UNASSIGNED."""
    out = np.full(len(coords), UNASSIGNED, dtype=np.int64)
    ids, mus, sigmas, rhs = snapshot(clusters)
    if len(ids) == 0:
        return out
    for start in range(0, len(coords), CHUNK):
        block = coords[start:start + CHUNK]
        delta = displacement_array(block[:, None, :], mus[None, :, :], dims, axis)
        m2 = feedback_mahalanobis(delta, kk, sigmas[None, :, :])
        admits = m2 ** 1.5 < rhs[None, :]
        pull = np.where(admits, pull_from_mahalanobis(m2), -np.inf)
        # first maximum wins, clusters are in id order
        best = np.argmax(pull, axis=1)
        out[start:start + CHUNK] = np.where(admits.any(axis=1), ids[best], UNASSIGNED)
    return out


def _build(coords: np.ndarray, assignment: np.ndarray, params: EngineParams,
           dims: Optional[PlaneDims], axis: Axis, ceiling: Optional[np.ndarray]) -> List[Cluster]:
    ids = np.unique(assignment[assignment != UNASSIGNED])
    return [
        Cluster.from_members(int(cid), coords, np.flatnonzero(assignment == cid), params.k,
                             params.sigma_floor, dims, axis, sigma_ceiling=ceiling)
        for cid in ids
    ]


def _merge_pair(clusters: Sequence[Cluster], kk: np.ndarray, dims: Optional[PlaneDims], axis: Axis):
    """
    First (lower, higher) id pair where one centroid passes the other's test.
    On a spectral plane the centroid must also sit inside the other's membrane
    on both frequency axes, so crystals fuse only where they overlap.
    """
    if len(clusters) < 2:
        return None
    ids, mus, sigmas, rhs = snapshot(clusters)
    # row i: centroids seen from cluster i
    delta = displacement_array(mus[None, :, :], mus[:, None, :], dims, axis)
    m2 = feedback_mahalanobis(delta, kk, sigmas[:, None, :])
    passes = m2 ** 1.5 < rhs[:, None]
    if dims is not None:
        radius = membrane_radius(sigmas[:, None, :2], kk[:2])
        passes &= np.sum((delta[..., :2] / radius) ** 2, axis=-1) <= 1.0
    mutual = np.triu(passes | passes.T, k=1)
    hits = np.argwhere(mutual)
    if len(hits) == 0:
        return None
    i, j = hits[0]
    return int(ids[i]), int(ids[j])


def _merge_all(coords, assignment, clusters, params, kk, dims, axis, ceiling):
    merges = 0
    while True:
        pair = _merge_pair(clusters, kk, dims, axis)
        if pair is None:
            return clusters, merges
        keep, gone = pair
        assignment[assignment == gone] = keep
        clusters = [c for c in clusters if c.id != gone]
        pos = next(n for n, c in enumerate(clusters) if c.id == keep)
        clusters[pos] = Cluster.from_members(keep, coords, np.flatnonzero(assignment == keep), params.k,
                                             params.sigma_floor, dims, axis, sigma_ceiling=ceiling)
        merges += 1


def _prune(coords, assignment, clusters, params, kk, dims, axis, ceiling):
    """Release members that fail their own cluster's test until none do."""
    released = 0
    while clusters:
        ids, mus, sigmas, rhs = snapshot(clusters)
        row = {cid: n for n, cid in enumerate(ids.tolist())}
        assigned = np.flatnonzero(assignment != UNASSIGNED)
        pos = np.array([row[c] for c in assignment[assigned].tolist()], dtype=np.int64)
        delta = displacement_array(coords[assigned], mus[pos], dims, axis)
        m2 = feedback_mahalanobis(delta, kk, sigmas[pos])
        failing = assigned[~(m2 ** 1.5 < rhs[pos])]
        if len(failing) == 0:
            break
        assignment[failing] = UNASSIGNED
        released += len(failing)
        clusters = _build(coords, assignment, params, dims, axis, ceiling)
    return clusters, released


# ---------------- fit ----------------

def fit(points: Points, params: EngineParams, dims: Optional[PlaneDims] = None, axis: Optional[Axis] = None,
        initial_assignment: Optional[np.ndarray] = None) -> Clustering:
    """
    Crystallize a point cloud.

    On a spectral plane every tile of a DC-centred lattice (`tile_size` cells
    a side) seeds one cluster, and no cluster's frequency sigma may exceed the
    spread of a full tile. Free-space clouds are seeded from the densest local
    maxima of a binned copy. `initial_assignment` replaces either seeding.

    Each pass scores every point against a frozen snapshot of the clusters,
    moves it to the admitting cluster with the strongest pull (or leaves it
    unassigned), rebuilds the clusters from their member lists, drops empty ones
    and merges overlapping pairs. A pass with nothing to do ends the loop.

    `dims` and `axis` default to the point cloud's own; a bare coordinate array
    or FeaturePoint list is a free-space magnitude cloud unless told otherwise.
    """
    coords, source_index, cloud_dims, cloud_axis, channel = _coords_of(points)
    if len(coords) == 0:
        raise InvalidInputError("cannot fit an empty point cloud")
    if not np.all(np.isfinite(coords)):
        raise InvalidInputError("point cloud holds non-finite coordinates")
    dims = cloud_dims if dims is None else dims
    axis = cloud_axis if axis is None else axis
    kk = params.k.as_array()
    ceiling = sigma_ceiling(dims, params)

    t0 = time.time()
    if initial_assignment is not None:
        assignment = np.array(initial_assignment, dtype=np.int64, copy=True)
        if assignment.shape != (len(coords),):
            raise InvalidInputError(f"initial assignment has shape {assignment.shape}, expected ({len(coords)},)")
        if np.any(assignment < UNASSIGNED):
            raise InvalidInputError("initial assignment holds negative cluster ids")
    else:
        seeds = _density_seeds(coords, params, axis) if dims is None else _tile_seeds(coords, params, dims)
        assignment = np.full(len(coords), UNASSIGNED, dtype=np.int64)
        for cid, idx in enumerate(seeds):
            assignment[idx] = cid
    clusters = _build(coords, assignment, params, dims, axis, ceiling)
    logger.debug(f"fit: {len(coords)} points, {len(clusters)} seed clusters, axis={axis.value}")

    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        new_assignment = _best_admitting(coords, clusters, kk, dims, axis)
        changes = int(np.count_nonzero(new_assignment != assignment))
        assignment = new_assignment
        before = len(clusters)
        clusters = _build(coords, assignment, params, dims, axis, ceiling)
        deleted = before - len(clusters)
        clusters, merges = _merge_all(coords, assignment, clusters, params, kk, dims, axis, ceiling)
        logger.debug(f"[pass {iterations}] changes={changes} merges={merges} deleted={deleted} clusters={len(clusters)}")
        if changes == 0 and merges == 0 and deleted == 0:
            converged = True
            break

    if not converged:
        clusters, released = _prune(coords, assignment, clusters, params, kk, dims, axis, ceiling)
        logger.warning(f"fit: no convergence after {params.max_iterations} passes; released {released} points")

    result = Clustering(
        clusters=tuple(clusters), assignment=assignment, iterations_used=iterations, converged=converged,
        dims=dims, axis=axis, channel=channel, source_index=source_index,
    )
    logger.info(
        f"[channel {channel.value}] fit: {len(clusters)} clusters, {result.unassigned_count} unassigned, "
        f"{iterations} passes, converged={converged} ({time.time() - t0:.2f}s)"
    )
    return result
