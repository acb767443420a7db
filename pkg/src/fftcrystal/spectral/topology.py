# src/fftcrystal/spectral/topology.py
"""
Geometry of the centered spectral plane.

The DFT spectrum is periodic, so the centered W x H rectangle is a torus: the four
corners (the highest frequencies) are one sample, "pole infinity", and DC is
"pole zero". Frequency displacements are taken through the wrap; the phase axis
wraps with period 2*pi; the log-magnitude axis does not wrap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np

from ..errors import InvalidInputError

if TYPE_CHECKING:
    from .transform import Axis, FeaturePoint

TWO_PI = 2.0 * math.pi

ArrayLike = Union[float, np.ndarray]


class PoleLabel(str, Enum):
    ZERO = "zero"
    INFINITY = "infinity"


@dataclass(frozen=True)
class PlaneDims:
    W: int
    H: int

    def __post_init__(self):
        if self.W < 2 or self.H < 2:
            raise InvalidInputError(f"plane dimensions must be at least 2x2, got {self.W}x{self.H}")

    @classmethod
    def of_shape(cls, shape: Tuple[int, ...]) -> "PlaneDims":
        return cls(W=int(shape[1]), H=int(shape[0]))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.H, self.W)

    @property
    def nyquist(self) -> Tuple[int, int]:
        return (-math.ceil(self.W / 2), -math.ceil(self.H / 2))

    def wrap_u(self, u: ArrayLike) -> ArrayLike:
        return _wrap_into(u, self.W)

    def wrap_v(self, v: ArrayLike) -> ArrayLike:
        return _wrap_into(v, self.H)


def _wrap_into(x: ArrayLike, period: int) -> ArrayLike:
    # centered index range [-period//2, period - period//2)
    half = period // 2
    out = np.mod(np.asarray(x, dtype=np.float64) + half, period) - half
    return float(out) if np.ndim(out) == 0 else out


def wrapped_delta(x: ArrayLike, mu: ArrayLike, period: float) -> ArrayLike:
    """
    Signed minimal representative of (x - mu) mod period, in [-period/2, period/2).
    Both +period/2 and -period/2 map to -period/2.
    """
    if not period > 0:
        raise InvalidInputError(f"period must be positive, got {period}")
    half = period / 2.0
    d = np.asarray(x, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    out = np.mod(d + half, period) - half
    # np.mod may round a tiny negative up to exactly `period`
    out = np.where(out >= half, out - period, out)
    return float(out) if np.ndim(out) == 0 else out


def circular_mean(values: ArrayLike, period: float) -> float:
    """Angle of the summed unit phasors, as a position in [-period/2, period/2)."""
    theta = TWO_PI * np.asarray(values, dtype=np.float64) / period
    angle = math.atan2(float(np.sum(np.sin(theta))), float(np.sum(np.cos(theta))))
    return float(wrapped_delta(angle * period / TWO_PI, 0.0, period))


def displacement_array(coords: np.ndarray, mu: np.ndarray, dims: Optional[PlaneDims], axis: "Axis") -> np.ndarray:
    """
    Broadcasting form of `displacement`: coords[..., 3] against mu[..., 3].
    With dims=None the frequency axes are treated as an unbounded plane.
    """
    from .transform import Axis

    coords = np.asarray(coords, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    d0 = coords[..., 0] - mu[..., 0]
    d1 = coords[..., 1] - mu[..., 1]
    if dims is not None:
        d0 = wrapped_delta(d0, 0.0, dims.W)
        d1 = wrapped_delta(d1, 0.0, dims.H)
    if axis == Axis.PHASE:
        d2 = wrapped_delta(coords[..., 2], mu[..., 2], TWO_PI)
    else:
        d2 = coords[..., 2] - mu[..., 2]
    return np.stack(np.broadcast_arrays(d0, d1, d2), axis=-1)


def displacement(p: "FeaturePoint", mu: np.ndarray, dims: Optional[PlaneDims], axis: "Axis") -> np.ndarray:
    return displacement_array(np.array([p.u, p.v, p.a], dtype=np.float64), mu, dims, axis)


def torus_distance(u: ArrayLike, v: ArrayLike, u0: ArrayLike, v0: ArrayLike, dims: PlaneDims) -> ArrayLike:
    return np.hypot(wrapped_delta(u, u0, dims.W), wrapped_delta(v, v0, dims.H))


def frequency_grid(dims: PlaneDims) -> Tuple[np.ndarray, np.ndarray]:
    """Centered (U, V) index grids of shape (H, W); DC at [H//2, W//2]."""
    rows, cols = np.indices(dims.shape)
    return cols - dims.W // 2, rows - dims.H // 2


def dc_distance_grid(dims: PlaneDims) -> np.ndarray:
    U, V = frequency_grid(dims)
    return torus_distance(U, V, 0, 0, dims)


def pole_of(u: ArrayLike, v: ArrayLike, dims: PlaneDims) -> PoleLabel:
    return PoleLabel.INFINITY if bool(infinity_mask(u, v, dims)) else PoleLabel.ZERO


def infinity_mask(u: ArrayLike, v: ArrayLike, dims: PlaneDims) -> ArrayLike:
    # ties go to Zero
    nu, nv = dims.nyquist
    to_zero = torus_distance(u, v, 0, 0, dims)
    to_inf = torus_distance(u, v, nu, nv, dims)
    return to_zero > to_inf


def pole_grid(dims: PlaneDims) -> np.ndarray:
    """Boolean (H, W) grid, True where the cell belongs to pole Infinity."""
    U, V = frequency_grid(dims)
    return np.asarray(infinity_mask(U, V, dims))


def phase_pole_of(phase: float) -> PoleLabel:
    """
    +-pi/2 are the infinities, 0 and pi the zeros. Equidistant phases (odd
    multiples of pi/4) label as Zero.
    """
    def circ(c: float) -> float:
        return abs(wrapped_delta(phase, c, TWO_PI))

    to_inf = min(circ(math.pi / 2), circ(-math.pi / 2))
    to_zero = min(circ(0.0), circ(math.pi))
    return PoleLabel.INFINITY if to_inf < to_zero else PoleLabel.ZERO
