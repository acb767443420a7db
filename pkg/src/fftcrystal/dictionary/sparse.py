# src/fftcrystal/dictionary/sparse.py
"""
Sparse magnitude dictionaries.

Outside a protected disk around DC every cell's magnitude is replaced by the
mean log-magnitude of its crystal; the disk and the cells that joined no crystal
keep their exact magnitudes. Phases are stored untouched.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..engine.cluster import UNASSIGNED
from ..engine.fit import Clustering
from ..errors import CoverageError, InvalidInputError
from ..spectral.topology import PlaneDims, dc_distance_grid, frequency_grid
from ..spectral.transform import Axis, Channel, Spectrum, apply_magnitudes, inverse_spectrum, phase_grid

logger = logging.getLogger("fftcrystal.dictionary")


@dataclass(frozen=True, eq=False)
class DictionaryEntry:
    cluster_id: int
    mean: float
    members: np.ndarray  # (n, 2) centered (u, v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DictionaryEntry):
            return NotImplemented
        return (self.cluster_id == other.cluster_id
                and np.array_equal(np.float64(self.mean), np.float64(other.mean))
                and np.array_equal(self.members, other.members))


@dataclass(frozen=True, eq=False)
class MagnitudeDictionary:
    dims: PlaneDims
    mask_radius: float
    entries: Tuple[DictionaryEntry, ...]
    passthrough_uv: np.ndarray  # (n, 2) centered (u, v)
    passthrough_mag: np.ndarray  # (n,) exact |F|
    phase_grid: np.ndarray  # (H, W) radians
    channel: Channel = Channel.GRAY

    def __post_init__(self):
        if not self.mask_radius >= 0:
            raise InvalidInputError(f"mask radius must be non-negative, got {self.mask_radius}")
        uv = np.asarray(self.passthrough_uv, dtype=np.int64).reshape(-1, 2)
        mag = np.asarray(self.passthrough_mag, dtype=np.float64).reshape(-1)
        ph = np.asarray(self.phase_grid, dtype=np.float64)
        if len(uv) != len(mag):
            raise InvalidInputError(f"{len(uv)} passthrough cells but {len(mag)} magnitudes")
        if ph.shape != self.dims.shape:
            raise InvalidInputError(f"phase grid {ph.shape} does not match {self.dims.W}x{self.dims.H}")
        object.__setattr__(self, "passthrough_uv", uv)
        object.__setattr__(self, "passthrough_mag", mag)
        object.__setattr__(self, "phase_grid", ph)
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def member_count(self) -> int:
        return sum(len(e.members) for e in self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MagnitudeDictionary):
            return NotImplemented
        return (self.dims == other.dims and self.channel == other.channel
                and np.array_equal(np.float64(self.mask_radius), np.float64(other.mask_radius))
                and self.entries == other.entries
                and np.array_equal(self.passthrough_uv, other.passthrough_uv)
                and np.array_equal(self.passthrough_mag, other.passthrough_mag)
                and np.array_equal(self.phase_grid, other.phase_grid))


class SparsityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    channel: Channel = Channel.GRAY
    total_cells: int
    dictionary_entries: int
    passthrough_cells: int
    compression_ratio: float = Field(gt=0, le=1)


# ---------------- grid helpers ----------------

def _cells(uv: np.ndarray, dims: PlaneDims) -> Tuple[np.ndarray, np.ndarray]:
    """(row, col) of centered (u, v) pairs."""
    return uv[:, 1] + dims.H // 2, uv[:, 0] + dims.W // 2


def coverage_counts(d: MagnitudeDictionary) -> np.ndarray:
    """How many times each cell is described; a well-formed dictionary has all ones."""
    counts = np.zeros(d.dims.shape, dtype=np.int64)
    for uv in [e.members for e in d.entries] + [d.passthrough_uv]:
        rows, cols = _cells(uv, d.dims)
        if len(uv) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= d.dims.H or cols.max() >= d.dims.W):
            raise CoverageError(f"dictionary cell outside the {d.dims.W}x{d.dims.H} grid")
        np.add.at(counts, (rows, cols), 1)
    return counts


def check_coverage(d: MagnitudeDictionary) -> None:
    counts = coverage_counts(d)
    if not np.all(counts == 1):
        missing = int(np.count_nonzero(counts == 0))
        doubled = int(np.count_nonzero(counts > 1))
        raise CoverageError(f"dictionary covers the grid badly: {missing} cells missing, {doubled} described twice")


# ---------------- build / reconstruct ----------------

def build_dictionary(spec: Spectrum, clustering: Clustering, mask_radius: float) -> Tuple[MagnitudeDictionary, SparsityReport]:
    """
    Cells strictly closer than `mask_radius` to DC (toroidal distance) and cells
    with no crystal pass through with their exact magnitudes; the rest carry the
    mean log-magnitude of their crystal.
    """
    dims = spec.dims
    if clustering.dims != dims:
        raise InvalidInputError(f"clustering grid {clustering.dims} does not match spectrum {dims}")
    if clustering.axis != Axis.MAGNITUDE:
        raise InvalidInputError("magnitude dictionaries need a clustering of the magnitude cloud")
    if not mask_radius >= 0:
        raise InvalidInputError(f"mask radius must be non-negative, got {mask_radius}")

    labels = clustering.labels().copy()
    labels[dc_distance_grid(dims) < mask_radius] = UNASSIGNED
    U, V = frequency_grid(dims)
    means = {c.id: float(c.mu[2]) for c in clustering.clusters}

    entries = []
    for cid in np.unique(labels[labels != UNASSIGNED]).tolist():
        sel = labels == cid
        entries.append(DictionaryEntry(cluster_id=int(cid), mean=means[cid],
                                       members=np.column_stack([U[sel], V[sel]]).astype(np.int64)))
    free = labels == UNASSIGNED
    d = MagnitudeDictionary(
        dims=dims, mask_radius=float(mask_radius), entries=tuple(entries),
        passthrough_uv=np.column_stack([U[free], V[free]]),
        passthrough_mag=np.abs(spec.coeffs)[free],
        phase_grid=phase_grid(spec),
        channel=clustering.channel,
    )
    total = dims.W * dims.H
    passthrough = int(np.count_nonzero(free))
    report = SparsityReport(
        channel=clustering.channel, total_cells=total, dictionary_entries=len(entries),
        passthrough_cells=passthrough, compression_ratio=(len(entries) + passthrough) / total,
    )
    logger.info(
        f"[channel {d.channel.value}] dictionary: {len(entries)} entries, {passthrough} passthrough cells, "
        f"ratio {report.compression_ratio:.4f}"
    )
    return d, report


def dictionary_magnitudes(d: MagnitudeDictionary) -> np.ndarray:
    check_coverage(d)
    mags = np.zeros(d.dims.shape, dtype=np.float64)
    for e in d.entries:
        # invert ln(1 + |F|)
        mags[_cells(e.members, d.dims)] = np.expm1(e.mean)
    mags[_cells(d.passthrough_uv, d.dims)] = d.passthrough_mag
    return mags


def reconstruct_spectrum(d: MagnitudeDictionary) -> Spectrum:
    mags = dictionary_magnitudes(d)
    unit = Spectrum(coeffs=np.exp(1j * d.phase_grid), centered=True)
    return apply_magnitudes(unit, np.maximum(mags, 0.0))


def reconstruct(d: MagnitudeDictionary) -> np.ndarray:
    return inverse_spectrum(reconstruct_spectrum(d))
