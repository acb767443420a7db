# src/fftcrystal/imaging/render.py
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from PIL import Image

from ..engine.cluster import UNASSIGNED
from ..engine.fit import Clustering
from ..errors import InvalidInputError
from ..spectral.topology import PlaneDims, PoleLabel

RGB = Tuple[int, int, int]


def color_of(cluster_id: int) -> RGB:
    # never black, black means "no crystal"
    digest = hashlib.blake2b(int(cluster_id).to_bytes(8, "little", signed=True), digest_size=3).digest()
    return tuple(40 + b % 216 for b in digest)


@dataclass(frozen=True, eq=False)
class CrystalImage:
    labels: np.ndarray
    colors: Dict[int, RGB]

    def to_rgb(self) -> np.ndarray:
        out = np.zeros(self.labels.shape + (3,), dtype=np.uint8)
        for cid, rgb in self.colors.items():
            out[self.labels == cid] = rgb
        return out

    def save_png(self, path: Path) -> None:
        Image.fromarray(self.to_rgb()).save(Path(path), format="PNG")


def render_crystals(clustering: Clustering, dims: Optional[PlaneDims] = None,
                    pole: Optional[PoleLabel] = None) -> CrystalImage:
    """
    One color per crystal laid out on the centered frequency grid. With `pole`
    only that pole's crystals are drawn; the rest goes black with the
    unassigned cells.
    """
    if dims is not None and clustering.dims != dims:
        raise InvalidInputError(f"clustering grid {clustering.dims} does not match {dims}")
    labels = clustering.labels().copy()
    keep = [c.id for c in clustering.clusters if pole is None or c.pole == pole]
    labels[~np.isin(labels, keep)] = UNASSIGNED
    return CrystalImage(labels=labels, colors={cid: color_of(cid) for cid in keep})
