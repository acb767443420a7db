# src/fftcrystal/stego/embed.py
"""
Key-based spectral steganography.

The key is the cover's spectrum after crystallization: every magnitude is
replaced by its crystal's mean (phases kept), so only someone holding the key
knows exactly what was smoothed away. The secret's spectrum is added on top,
weighted alpha around pole Zero and beta around pole Infinity.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import EngineParams, ToolConfig
from ..dictionary.sparse import build_dictionary, dictionary_magnitudes
from ..engine.fit import fit
from ..errors import InvalidInputError
from ..spectral.topology import PlaneDims, pole_grid
from ..spectral.transform import (Axis, Channel, Spectrum, apply_magnitudes, build_point_cloud, forward_spectrum,
                                  inverse_spectrum, merge_channels, mirror, split_channels)

logger = logging.getLogger("fftcrystal.stego")


class StegoParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    alpha: float = Field(0.02, gt=0)
    beta: float = Field(0.08, gt=0)
    engine: EngineParams = Field(default_factory=EngineParams)

    @classmethod
    def from_config(cls, cfg: ToolConfig) -> "StegoParams":
        return cls(alpha=cfg.stego.alpha, beta=cfg.stego.beta, engine=cfg.engine)


@dataclass(frozen=True, eq=False)
class StegoKey:
    spectra: Tuple[Spectrum, ...]
    channels: Tuple[Channel, ...]
    params: StegoParams

    def __post_init__(self):
        if len(self.spectra) != len(self.channels) or not self.spectra:
            raise InvalidInputError("a key needs one spectrum per channel")
        dims = {s.dims for s in self.spectra}
        if len(dims) != 1:
            raise InvalidInputError("all key channels must share one grid")

    @property
    def dims(self) -> PlaneDims:
        return self.spectra[0].dims

    def same_as(self, other: "StegoKey") -> bool:
        """Bitwise comparison of coefficients plus the echoed parameters."""
        return (self.channels == other.channels and self.params == other.params
                and all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(self.spectra, other.spectra)))


# ---------------- regions ----------------

def region_weights(dims: PlaneDims, alpha: float, beta: float) -> np.ndarray:
    """
    alpha on pole Zero, beta on pole Infinity. A cell counts as Infinity only
    when its mirror does too, so the weights are symmetric and real images stay
    real on odd grids.
    """
    inf = pole_grid(dims)
    inf = inf & mirror(inf)
    return np.where(inf, beta, alpha).astype(np.float64)


# ---------------- key ----------------

def crystallize_channel(plane: np.ndarray, engine: EngineParams, channel: Channel = Channel.GRAY) -> Spectrum:
    spec = forward_spectrum(plane)
    clustering = fit(build_point_cloud(spec, Axis.MAGNITUDE, channel), engine)
    d, _ = build_dictionary(spec, clustering, mask_radius=0.0)
    mags = dictionary_magnitudes(d)
    # conjugate pairs may sit in different crystals; share their magnitude
    mags = 0.5 * (mags + mirror(mags))
    return apply_magnitudes(spec, mags)


def crystallize_cover(cover: np.ndarray, params: StegoParams) -> StegoKey:
    t0 = time.time()
    chans, spectra = [], []
    for ch, plane in split_channels(cover):
        chans.append(ch)
        spectra.append(crystallize_channel(plane, params.engine, ch))
    key = StegoKey(spectra=tuple(spectra), channels=tuple(chans), params=params)
    logger.info(f"key: {len(chans)} channel(s) crystallized at {key.dims.W}x{key.dims.H} ({time.time() - t0:.2f}s)")
    return key


# ---------------- embed / extract ----------------

def _pad_to(plane: np.ndarray, dims: PlaneDims) -> np.ndarray:
    H, W = plane.shape
    if H > dims.H or W > dims.W:
        raise InvalidInputError(f"secret {W}x{H} does not fit the {dims.W}x{dims.H} cover")
    out = np.zeros(dims.shape, dtype=np.float64)
    out[:H, :W] = plane
    return out


def _secret_planes(secret: np.ndarray, key: StegoKey) -> List[np.ndarray]:
    planes = [p for _, p in split_channels(secret)]
    if len(planes) == 1 and len(key.channels) > 1:
        planes = planes * len(key.channels)
    if len(planes) != len(key.channels):
        raise InvalidInputError(f"secret has {len(planes)} channels, key has {len(key.channels)}")
    return [_pad_to(p, key.dims) for p in planes]


def _image_planes(image: np.ndarray, key: StegoKey, what: str) -> List[np.ndarray]:
    planes = [p for _, p in split_channels(image)]
    if len(planes) != len(key.channels):
        raise InvalidInputError(f"{what} has {len(planes)} channels, key has {len(key.channels)}")
    if planes[0].shape != key.dims.shape:
        raise InvalidInputError(f"{what} is {planes[0].shape[1]}x{planes[0].shape[0]}, key is {key.dims.W}x{key.dims.H}")
    return planes


def embed(key: StegoKey, secret: np.ndarray, params: Optional[StegoParams] = None) -> np.ndarray:
    """F_stego = F_key + w F_secret per channel; returned unclamped."""
    params = key.params if params is None else params
    w = region_weights(key.dims, params.alpha, params.beta)
    out = []
    for spec, plane in zip(key.spectra, _secret_planes(secret, key)):
        stego = Spectrum(coeffs=spec.coeffs + w * forward_spectrum(plane).coeffs)
        out.append(inverse_spectrum(stego))
    return merge_channels(out)


def _recover(image_planes: Sequence[np.ndarray], references: Sequence[np.ndarray], w: np.ndarray) -> np.ndarray:
    out = []
    for plane, ref in zip(image_planes, references):
        diff = forward_spectrum(plane).coeffs - ref
        out.append(inverse_spectrum(Spectrum(coeffs=diff / w)))
    return merge_channels(out)


def extract(stego: np.ndarray, key: StegoKey, params: Optional[StegoParams] = None) -> np.ndarray:
    """Secret estimate at cover size (the zero padding comes back too)."""
    params = key.params if params is None else params
    w = region_weights(key.dims, params.alpha, params.beta)
    return _recover(_image_planes(stego, key, "stego image"), [s.coeffs for s in key.spectra], w)


def intercept_extract(stego: np.ndarray, original_cover: np.ndarray, params: StegoParams) -> np.ndarray:
    """The extraction an eavesdropper can run: the original cover stands in for the key."""
    stego_planes = [p for _, p in split_channels(stego)]
    cover_planes = [p for _, p in split_channels(original_cover)]
    if len(stego_planes) != len(cover_planes) or stego_planes[0].shape != cover_planes[0].shape:
        raise InvalidInputError("stego image and cover differ in size or channel count")
    dims = PlaneDims.of_shape(cover_planes[0].shape)
    w = region_weights(dims, params.alpha, params.beta)
    return _recover(stego_planes, [forward_spectrum(p).coeffs for p in cover_planes], w)
