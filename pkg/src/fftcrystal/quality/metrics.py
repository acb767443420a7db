# src/fftcrystal/quality/metrics.py
from __future__ import annotations

import math
from typing import Annotated, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, PlainSerializer

from ..errors import InvalidInputError, UndefinedMetricError
from ..spectral.transform import split_channels


def _decibels_out(x: float) -> Union[float, str]:
    return "inf" if math.isinf(x) and x > 0 else x


# +inf goes out as the string "inf"
Decibels = Annotated[float, PlainSerializer(_decibels_out, return_type=Union[float, str], when_used="json")]


class QualityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    psnr: Decibels
    ssim: float
    uqi: Optional[float] = None


# ---------------- helpers ----------------

def _pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _per_channel(fn, a: np.ndarray, b: np.ndarray, **kw) -> float:
    a, b = _pair(a, b)
    planes_a = split_channels(a)
    planes_b = split_channels(b)
    vals = [fn(pa, pb, **kw) for (_, pa), (_, pb) in zip(planes_a, planes_b)]
    return float(np.mean(vals))


def _window_stats(a: np.ndarray, b: np.ndarray, window: int):
    if window < 1:
        raise InvalidInputError(f"window must be positive, got {window}")
    if a.shape[0] < window or a.shape[1] < window:
        raise InvalidInputError(f"image {a.shape[1]}x{a.shape[0]} is smaller than the {window}x{window} window")
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da ** 2).mean(axis=(-2, -1))
    var_b = (db ** 2).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    return mu_a, mu_b, var_a, var_b, cov


# ---------------- metrics ----------------

def _psnr_plane(a: np.ndarray, b: np.ndarray, max_value: float) -> float:
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_value ** 2 / mse)


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 255.0) -> float:
    """10 log10(max^2 / MSE); +inf for identical images. RGB averages the channels."""
    if not max_value > 0:
        raise InvalidInputError(f"max_value must be positive, got {max_value}")
    return _per_channel(_psnr_plane, a, b, max_value=max_value)


def _ssim_plane(a, b, window, c1, c2) -> float:
    mu_a, mu_b, var_a, var_b, cov = _window_stats(a, b, window)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    if c1 > 0 and c2 > 0:
        return float(np.mean(num / den))
    ok = den != 0
    if not np.any(ok):
        raise UndefinedMetricError("every window is degenerate (zero mean and variance terms)")
    return float(np.mean(num[ok] / den[ok]))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8, max_value: float = 255.0,
         c1: Optional[float] = None, c2: Optional[float] = None) -> float:
    """
    Mean over all window positions (uniform window, stride 1, population
    variances) of the structural similarity term. Stabilizers default to
    (0.01 L)^2 and (0.03 L)^2 with L = max_value.
    """
    c1 = (0.01 * max_value) ** 2 if c1 is None else c1
    c2 = (0.03 * max_value) ** 2 if c2 is None else c2
    return _per_channel(_ssim_plane, a, b, window=window, c1=c1, c2=c2)


def uqi(a: np.ndarray, b: np.ndarray, window: int = 8) -> float:
    # windows with a zero denominator are left out of the mean
    return _per_channel(_ssim_plane, a, b, window=window, c1=0.0, c2=0.0)


def compare(a: np.ndarray, b: np.ndarray, max_value: float = 255.0, window: int = 8) -> QualityReport:
    try:
        u = uqi(a, b, window=window)
    except UndefinedMetricError:
        u = None
    return QualityReport(psnr=psnr(a, b, max_value), ssim=ssim(a, b, window=window, max_value=max_value), uqi=u)


# ---------------- histograms ----------------

def channel_histograms(images: Dict[str, np.ndarray], max_value: float = 255.0) -> pd.DataFrame:
    """256-bin histograms of the exported (clamped, rounded) pixel values, one column per image channel."""
    cols = {"bin": np.arange(256)}
    for name, img in images.items():
        for ch, plane in split_channels(img):
            q = np.rint(np.clip(plane, 0.0, max_value) * (255.0 / max_value)).astype(np.int64)
            cols[f"{name}_{ch.value}"] = np.bincount(q.ravel(), minlength=256)
    return pd.DataFrame(cols)
