# src/fftcrystal/imaging/corpus.py
"""
Bundled test images, drawn in code so the corpus is reproducible and free to
redistribute. Every generator returns integer-valued float pixels in [0, 255].
"""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np
from scipy.ndimage import gaussian_filter


def _finish(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 255.0))


def _unit_grid(size: int):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    return x / size, y / size


def gradient(size: int = 128) -> np.ndarray:
    x, y = _unit_grid(size)
    return _finish(255.0 * (0.5 * x + 0.5 * y))


def two_tone(size: int = 128) -> np.ndarray:
    x, _ = _unit_grid(size)
    return _finish(np.where(x < 0.5, 60.0, 190.0))


def checkerboard(size: int = 128, cell: int = 16) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size]
    return _finish(np.where(((x // cell) + (y // cell)) % 2 == 0, 40.0, 215.0))


def _texture(size: int, seed: int, blur: float) -> np.ndarray:
    noise = gaussian_filter(np.random.default_rng(seed).standard_normal((size, size)), blur, mode="wrap")
    return noise / (np.abs(noise).max() or 1.0)


def _scene_plane(size: int, seed: int, tilt: float) -> np.ndarray:
    x, y = _unit_grid(size)
    img = 70.0 + 80.0 * x * tilt + 40.0 * np.sin(np.pi * y) ** 2
    for cx, cy, r, level in ((0.3, 0.35, 0.16, 70.0), (0.72, 0.6, 0.11, -45.0), (0.45, 0.78, 0.07, 55.0)):
        img += level * ((x - cx) ** 2 + (y - cy) ** 2 < r ** 2)
    # a roof edge and a dark bar
    img += 35.0 * ((x + 0.6 * y) > 1.15)
    img -= 50.0 * ((np.abs(y - 0.15) < 0.03) & (x > 0.55))
    img += 18.0 * _texture(size, seed, 1.5)
    img += 6.0 * np.sin(2 * np.pi * 11 * x) * (y > 0.5)
    return _finish(img)


def scene(size: int = 128, seed: int = 7) -> np.ndarray:
    """Smooth light, disks, edges and fine texture: the photographic stand-in."""
    return _scene_plane(size, seed, 1.0)


def scene_rgb(size: int = 128, seed: int = 7) -> np.ndarray:
    return np.stack([_scene_plane(size, seed, 1.0),
                     _scene_plane(size, seed + 1, 0.6),
                     _scene_plane(size, seed + 2, 0.2)], axis=-1)


def portrait(size: int = 128) -> np.ndarray:
    """A line-drawn face, used as the secret."""
    x, y = _unit_grid(size)
    img = np.full((size, size), 30.0)
    face = (x - 0.5) ** 2 / 0.33 ** 2 + (y - 0.52) ** 2 / 0.4 ** 2 < 1
    img[face] = 200.0
    for ex in (0.37, 0.63):
        img[(x - ex) ** 2 + (y - 0.42) ** 2 < 0.05 ** 2] = 20.0
    mouth = (np.abs(np.hypot(x - 0.5, y - 0.5) - 0.2) < 0.025) & (y > 0.6)
    img[mouth] = 60.0
    img[(np.abs(x - 0.5) < 0.02) & (y > 0.45) & (y < 0.6)] = 120.0
    return _finish(img)


CORPUS: Dict[str, Callable[..., np.ndarray]] = {
    "gradient": gradient,
    "two_tone": two_tone,
    "checkerboard": checkerboard,
    "scene": scene,
    "scene_rgb": scene_rgb,
    "portrait": portrait,
}
