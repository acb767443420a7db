# src/fftcrystal/denoise/noise.py
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import EngineParams, NoiseThresholds
from ..engine.cluster import UNASSIGNED
from ..engine.fit import Clustering, fit
from ..errors import InvalidInputError
from ..quality.metrics import Decibels, psnr, ssim
from ..spectral.topology import PoleLabel, dc_distance_grid, torus_distance
from ..spectral.transform import (Axis, Channel, apply_magnitudes, build_point_cloud, forward_spectrum,
                                  inverse_spectrum, merge_channels, mirror, split_channels)

logger = logging.getLogger("fftcrystal.denoise")

# statistics within this of the cutoff count as equal to it
TIE_TOL = 1e-9


class ChannelDenoiseReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    channel: Channel
    flagged_clusters: List[int]
    flagged_unassigned: int
    zeroed_cells: int
    suspected_pct: float = Field(ge=0, le=100)
    psnr_before: Optional[Decibels] = None
    psnr_after: Optional[Decibels] = None
    ssim_before: Optional[float] = None
    ssim_after: Optional[float] = None


class DenoiseReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    channels: List[ChannelDenoiseReport]
    psnr_before: Optional[Decibels] = None
    psnr_after: Optional[Decibels] = None
    ssim_before: Optional[float] = None
    ssim_after: Optional[float] = None


@dataclass(frozen=True, eq=False)
class NoiseFlags:
    cluster_ids: FrozenSet[int]
    cells: np.ndarray  # (H, W) bool, before symmetrization
    unassigned_cells: int

    @property
    def percentage(self) -> float:
        return 100.0 * np.count_nonzero(self.cells) / self.cells.size


# ---------------- flagging ----------------

def _exceeds(values: np.ndarray, percentile: float) -> np.ndarray:
    if len(values) == 0:
        return np.zeros(0, dtype=bool)
    cutoff = np.percentile(values, percentile)
    return values > cutoff + TIE_TOL


def flag_noise_clusters(clustering: Clustering, thresholds: NoiseThresholds) -> NoiseFlags:
    """
    Pole-Zero crystals whose magnitude spread is above the dev percentile of
    their group, and pole-Infinity crystals whose mean magnitude is above the
    mag percentile of theirs, are flagged. Cells that joined no crystal are
    flagged one by one. Crystals centred within protect_dc_radius of DC are
    never flagged, and no cell inside that disk is ever marked, whichever
    crystal it belongs to.
    """
    if clustering.dims is None:
        raise InvalidInputError("noise flagging needs a clustering of a spectral grid")
    if not clustering.clusters and clustering.unassigned_count == 0:
        raise InvalidInputError("empty clustering")
    dims = clustering.dims
    radius = thresholds.protect_dc_radius

    zero = [c for c in clustering.clusters if c.pole == PoleLabel.ZERO]
    inf = [c for c in clustering.clusters if c.pole == PoleLabel.INFINITY]
    flagged = set()
    for group, stat, pct in (
        (zero, np.array([c.sigma[2] for c in zero]), thresholds.dev_percentile),
        (inf, np.array([c.mu[2] for c in inf]), thresholds.mag_percentile),
    ):
        for c, hit in zip(group, _exceeds(stat, pct)):
            if hit and torus_distance(c.mu[0], c.mu[1], 0, 0, dims) > radius:
                flagged.add(c.id)

    labels = clustering.labels()
    outside = dc_distance_grid(dims) > radius
    free = (labels == UNASSIGNED) & outside
    cells = np.isin(labels, list(flagged)) & outside | free
    return NoiseFlags(cluster_ids=frozenset(flagged), cells=cells, unassigned_cells=int(np.count_nonzero(free)))


# ---------------- pipeline ----------------

def denoise_channel(plane: np.ndarray, params: EngineParams, thresholds: NoiseThresholds,
                    channel: Channel = Channel.GRAY) -> Tuple[np.ndarray, NoiseFlags, np.ndarray]:
    spec = forward_spectrum(plane)
    clustering = fit(build_point_cloud(spec, Axis.MAGNITUDE, channel), params)
    flags = flag_noise_clusters(clustering, thresholds)
    # (u, v) and (-u, -v) go together so the output stays real
    zeroed = flags.cells | mirror(flags.cells)
    mags = np.abs(spec.coeffs)
    mags[zeroed] = 0.0
    return inverse_spectrum(apply_magnitudes(spec, mags)), flags, zeroed


def denoise_image(noisy: np.ndarray, params: EngineParams, thresholds: NoiseThresholds,
                  reference: Optional[np.ndarray] = None, max_value: float = 255.0,
                  window: int = 8) -> Tuple[np.ndarray, DenoiseReport]:
    """
    Crystallize each channel's magnitude cloud, zero the flagged cells and
    invert. With a clean `reference` the report carries quality before/after.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    if reference is not None and np.shape(reference) != noisy.shape:
        raise InvalidInputError(f"reference shape {np.shape(reference)} does not match {noisy.shape}")
    refs = [p for _, p in split_channels(reference)] if reference is not None else None
    planes, reports = [], []
    for i, (ch, plane) in enumerate(split_channels(noisy)):
        t0 = time.time()
        out, flags, zeroed = denoise_channel(plane, params, thresholds, ch)
        planes.append(out)
        extra = {}
        if refs is not None:
            ref = refs[i]
            shown = np.clip(out, 0.0, max_value)
            extra = dict(
                psnr_before=psnr(ref, plane, max_value), psnr_after=psnr(ref, shown, max_value),
                ssim_before=ssim(ref, plane, window, max_value), ssim_after=ssim(ref, shown, window, max_value),
            )
        rep = ChannelDenoiseReport(
            channel=ch, flagged_clusters=sorted(flags.cluster_ids), flagged_unassigned=flags.unassigned_cells,
            zeroed_cells=int(np.count_nonzero(zeroed)), suspected_pct=100.0 * np.count_nonzero(zeroed) / zeroed.size,
            **extra,
        )
        reports.append(rep)
        logger.info(
            f"[channel {ch.value}] denoise: {len(rep.flagged_clusters)} clusters flagged, "
            f"{rep.suspected_pct:.2f}% of frequencies zeroed ({time.time() - t0:.2f}s)"
        )

    result = merge_channels(planes)
    overall = {}
    if reference is not None:
        shown = np.clip(result, 0.0, max_value)
        overall = dict(
            psnr_before=psnr(reference, noisy, max_value), psnr_after=psnr(reference, shown, max_value),
            ssim_before=ssim(reference, noisy, window, max_value), ssim_after=ssim(reference, shown, window, max_value),
        )
    return result, DenoiseReport(channels=reports, **overall)


# ---------------- synthetic noise ----------------

def corrupt_poisson_gaussian(clean: np.ndarray, peak: float, read_sigma: float, rng_seed: int = 0,
                             max_value: float = 255.0) -> np.ndarray:
    """pixel -> Poisson(peak * pixel / max) * max / peak + Normal(0, read_sigma). Not clamped."""
    if not peak > 0:
        raise InvalidInputError(f"peak must be positive, got {peak}")
    if not read_sigma >= 0:
        raise InvalidInputError(f"read sigma must be non-negative, got {read_sigma}")
    clean = np.asarray(clean, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)
    lam = peak * np.clip(clean, 0.0, None) / max_value
    shot = rng.poisson(lam).astype(np.float64) * max_value / peak
    return shot + rng.normal(0.0, read_sigma, size=clean.shape)
