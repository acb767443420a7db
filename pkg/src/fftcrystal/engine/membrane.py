# src/fftcrystal/engine/membrane.py
"""
Membrane algebra of the Inverse Square Mean Shift criterion in three dimensions.

Per axis i a cluster has centroid mu_i, standard deviation sigma_i and feedback
constant k_i. The membrane sits at sigma_i / (1 + k_i sigma_i) from the centroid;
seen through the distorted ruler, the membrane's own offset is k_i / (1 + k_i sigma_i)
and a point at distance sigma_i appears at k_i sigma_i.

With S = sum_i k_i^2 / (1 + k_i sigma_i)^2:
    membrane force       1 / S
    outsider pull        1 / sum_i k_i^2 Delta_i^2 / sigma_i^2
    absorption           (sum_i k_i^2 Delta_i^2 / sigma_i^2)^1.5
                             < sqrt(2 pi^3) prod_i(k_i sigma_i) S exp(S / 2)

Every function accepts scalars or arrays whose last axis holds the three axes.
"""
from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from ..config import FeedbackConstants
from ..errors import DegenerateClusterError

Feedback = Union[FeedbackConstants, Sequence[float], np.ndarray]

SQRT_2_PI_CUBED = math.sqrt(2.0 * math.pi ** 3)
TWO_OVER_PI_POW_1_5 = (2.0 / math.pi) ** 1.5


def _k(k: Feedback) -> np.ndarray:
    if isinstance(k, FeedbackConstants):
        return k.as_array()
    return np.asarray(k, dtype=np.float64)


def membrane_radius(sigma_i, k_i):
    return np.asarray(sigma_i, dtype=np.float64) / (1.0 + np.asarray(k_i) * np.asarray(sigma_i))


def membrane_gap(sigma_i, k_i):
    """
    Euclidean gap between the membrane and a point at distance sigma_i:
    sigma_i - sigma_i/(1 + k_i sigma_i) = k_i sigma_i^2 / (1 + k_i sigma_i).
    (Printed in the literature as k_i^2 sigma_i / (1 + k_i sigma_i), which does
    not reduce to k_i sigma_i once divided by the membrane radius.)
    """
    sigma_i = np.asarray(sigma_i, dtype=np.float64)
    return np.asarray(k_i) * sigma_i ** 2 / (1.0 + np.asarray(k_i) * sigma_i)


def perceived_membrane_offset(sigma_i, k_i):
    """Gap measured with the membrane's ruler; equals k_i * sigma_i."""
    radius = membrane_radius(sigma_i, k_i)
    gap = membrane_gap(sigma_i, k_i)
    out = np.divide(gap, radius, out=np.zeros_like(np.asarray(gap, dtype=np.float64)), where=radius > 0)
    return float(out) if np.ndim(out) == 0 else out


def perceived_membrane_distance(sigma_i, k_i):
    # membrane offset in units of sigma_i, distorted by k_i
    return np.asarray(k_i) / (1.0 + np.asarray(k_i) * np.asarray(sigma_i, dtype=np.float64))


def feedback_sum(k: Feedback, sigma) -> np.ndarray:
    """S = sum_i k_i^2 / (1 + k_i sigma_i)^2 over the last axis."""
    return np.sum(perceived_membrane_distance(sigma, _k(k)) ** 2, axis=-1)


def _require_positive(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise DegenerateClusterError(f"standard deviation must be positive on every axis, got {sigma.tolist()}")
    return sigma


def membrane_population(N, sigma, k: Feedback, epsilon) -> float:
    """Asymptotic membrane head count with feedback."""
    sigma = _require_positive(sigma)
    kk = _k(k)
    S = feedback_sum(kk, sigma)
    return (N * TWO_OVER_PI_POW_1_5 / np.prod(kk * sigma, axis=-1)
            * np.sum(np.asarray(epsilon, dtype=np.float64), axis=-1) * np.exp(-0.5 * S))


def membrane_population_general(N, sigma, t, epsilon) -> float:
    """No-feedback form with explicit border multipliers t_i."""
    sigma = _require_positive(sigma)
    t = np.asarray(t, dtype=np.float64)
    return (N * TWO_OVER_PI_POW_1_5 / np.prod(sigma, axis=-1)
            * np.sum(np.asarray(epsilon, dtype=np.float64), axis=-1) * np.exp(-0.5 * np.sum(t ** 2, axis=-1)))


def membrane_force(k: Feedback, sigma):
    return 1.0 / feedback_sum(k, sigma)


def membrane_force_general(t):
    return 1.0 / np.sum(np.asarray(t, dtype=np.float64) ** 2, axis=-1)


def feedback_mahalanobis(delta, k: Feedback, sigma):
    """sum_i k_i^2 Delta_i^2 / sigma_i^2 over the last axis."""
    kk = _k(k)
    return np.sum((kk * np.asarray(delta, dtype=np.float64) / np.asarray(sigma, dtype=np.float64)) ** 2, axis=-1)


def pull_from_mahalanobis(m2):
    """1 / m2, with +inf where the point sits on the centroid."""
    m2 = np.asarray(m2, dtype=np.float64)
    out = np.divide(1.0, m2, out=np.full_like(m2, np.inf), where=m2 > 0)
    return float(out) if np.ndim(out) == 0 else out


def absorption_rhs(k: Feedback, sigma):
    """Right side of the absorption criterion; depends on the cluster only."""
    kk = _k(k)
    sigma = np.asarray(sigma, dtype=np.float64)
    S = feedback_sum(kk, sigma)
    return SQRT_2_PI_CUBED * np.prod(kk * sigma, axis=-1) * S * np.exp(0.5 * S)


def absorbs(m2, rhs):
    return np.asarray(m2, dtype=np.float64) ** 1.5 < rhs


def inside_border(delta, sigma, t, d: float = 3.0) -> bool:
    """Border ellipsoid: sum_i Delta_i^2 / (t_i sigma_i)^2 <= d."""
    scaled = np.asarray(delta, dtype=np.float64) / (np.asarray(t, dtype=np.float64) * np.asarray(sigma, dtype=np.float64))
    return bool(np.sum(scaled ** 2) <= d)
