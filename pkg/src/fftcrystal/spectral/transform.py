# src/fftcrystal/spectral/transform.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.fft import fft2, fftshift, ifft2, ifftshift

from ..errors import InvalidInputError
from .topology import PlaneDims, frequency_grid

logger = logging.getLogger("fftcrystal.spectral")

IMAG_RESIDUE_TOL = 1e-6


class Axis(str, Enum):
    MAGNITUDE = "magnitude"
    PHASE = "phase"


class Channel(str, Enum):
    GRAY = "gray"
    R = "R"
    G = "G"
    B = "B"


RGB_CHANNELS = (Channel.R, Channel.G, Channel.B)


# ---------------- types ----------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    DFT coefficients as an (H, W) complex array. When `centered`, DC sits at
    [H//2, W//2] and column/row offsets from there are the signed indices u/v.
    The array is a private read-only copy, so a Spectrum can be shared freely.
    """
    coeffs: np.ndarray
    centered: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise InvalidInputError(f"spectrum must be a non-empty 2-D grid, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def height(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dims(self) -> PlaneDims:
        return PlaneDims.of_shape(self.coeffs.shape)


@dataclass(frozen=True)
class FeaturePoint:
    u: float
    v: float
    a: float
    channel: Channel
    source_index: int


@dataclass(frozen=True, eq=False)
class PointCloud(Sequence[FeaturePoint]):
    """
    The 3-D point cloud of one channel's spectrum, stored column-wise. Point i
    is grid cell i in row-major order; iterating yields FeaturePoint values.
    `dims=None` marks a free-space cloud (no frequency wrap), used for
    synthetic data.
    """
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    source_index: np.ndarray
    dims: Optional[PlaneDims]
    axis: Axis = Axis.MAGNITUDE
    channel: Channel = Channel.GRAY
    _coords: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coords = np.column_stack([self.u, self.v, self.a]).astype(np.float64)
        coords.setflags(write=False)
        object.__setattr__(self, "_coords", coords)

    @classmethod
    def from_coords(cls, coords: np.ndarray, dims: Optional[PlaneDims] = None,
                    axis: Axis = Axis.MAGNITUDE, channel: Channel = Channel.GRAY) -> "PointCloud":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise InvalidInputError(f"point coordinates must have shape (P, 3), got {coords.shape}")
        return cls(u=coords[:, 0], v=coords[:, 1], a=coords[:, 2],
                   source_index=np.arange(len(coords)), dims=dims, axis=axis, channel=channel)

    def coords(self) -> np.ndarray:
        return self._coords

    def __len__(self) -> int:
        return len(self._coords)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return FeaturePoint(u=self.u[i].item(), v=self.v[i].item(), a=float(self.a[i]),
                            channel=self.channel, source_index=int(self.source_index[i]))

    def __iter__(self) -> Iterator[FeaturePoint]:
        for i in range(len(self)):
            yield self[i]


# ---------------- transforms ----------------

def _check_image(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"expected a single-channel 2-D image, got shape {img.shape}")
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise InvalidInputError(f"image must be at least 2x2, got {img.shape[1]}x{img.shape[0]}")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("image holds non-finite pixel values")
    return img


def forward_spectrum(image: np.ndarray) -> Spectrum:
    """F(u,v) = sum img(x,y) exp(-2 pi i (ux/W + vy/H)), unnormalized, centered."""
    img = _check_image(image)
    return Spectrum(coeffs=fftshift(fft2(img)), centered=True)


def inverse_spectrum(spec: Spectrum) -> np.ndarray:
    """1/(WH)-normalized inverse; the imaginary residue is dropped, no clamping."""
    grid = ifftshift(spec.coeffs) if spec.centered else spec.coeffs
    out = ifft2(grid)
    residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
    if residue > IMAG_RESIDUE_TOL:
        logger.debug(f"inverse spectrum: imaginary residue {residue:.3g} discarded (spectrum not conjugate-symmetric)")
    return np.ascontiguousarray(out.real)


def log_magnitude(spec: Spectrum) -> np.ndarray:
    # ln(1 + |F|) keeps the map total at |F| = 0
    return np.log1p(np.abs(spec.coeffs))


def phase_grid(spec: Spectrum) -> np.ndarray:
    ph = np.angle(spec.coeffs)
    ph[ph == -np.pi] = np.pi
    ph[spec.coeffs == 0] = 0.0
    return ph


def build_point_cloud(spec: Spectrum, axis: Axis = Axis.MAGNITUDE, channel: Channel = Channel.GRAY) -> PointCloud:
    dims = spec.dims
    U, V = frequency_grid(dims)
    a = log_magnitude(spec) if axis == Axis.MAGNITUDE else phase_grid(spec)
    return PointCloud(u=U.ravel(), v=V.ravel(), a=a.ravel(),
                      source_index=np.arange(dims.W * dims.H), dims=dims, axis=axis, channel=channel)


def apply_magnitudes(spec: Spectrum, new_mags: np.ndarray) -> Spectrum:
    """
    Replace |F| keeping arg(F). Scaling real and imaginary parts by the same
    positive factor leaves the phase untouched; exact zeros take phase 0.
    """
    mags = np.asarray(new_mags, dtype=np.float64)
    if mags.shape != spec.coeffs.shape:
        raise InvalidInputError(f"magnitude grid {mags.shape} does not match spectrum {spec.coeffs.shape}")
    if not np.all(np.isfinite(mags)):
        raise InvalidInputError("magnitudes must be finite")
    if np.any(mags < 0):
        raise InvalidInputError("magnitudes must be non-negative")
    coeffs = spec.coeffs
    absval = np.abs(coeffs)
    nonzero = absval > 0
    factor = np.divide(mags, absval, out=np.zeros_like(mags), where=nonzero)
    out = coeffs * factor
    out = np.where(coeffs == 0, mags + 0j, out)
    return Spectrum(coeffs=out, centered=spec.centered)


def mirror(grid: np.ndarray) -> np.ndarray:
    """grid[(u, v)] -> grid[(-u, -v)] on a centered (H, W) grid."""
    H, W = grid.shape[:2]
    rows = (2 * (H // 2) - np.arange(H)) % H
    cols = (2 * (W // 2) - np.arange(W)) % W
    return grid[np.ix_(rows, cols)]


# ---------------- channels ----------------

def split_channels(image: np.ndarray) -> List[Tuple[Channel, np.ndarray]]:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return [(Channel.GRAY, img)]
    if img.ndim == 3 and img.shape[2] == 3:
        return [(ch, img[:, :, i]) for i, ch in enumerate(RGB_CHANNELS)]
    raise InvalidInputError(f"expected an (H, W) or (H, W, 3) image, got shape {img.shape}")


def merge_channels(planes: Sequence[np.ndarray]) -> np.ndarray:
    if len(planes) == 1:
        return np.asarray(planes[0], dtype=np.float64)
    return np.stack(planes, axis=-1).astype(np.float64)
