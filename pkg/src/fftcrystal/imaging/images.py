# src/fftcrystal/imaging/images.py
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import BadMagicError, FormatError, InvalidInputError, TruncatedStreamError, UnsupportedFormatError

logger = logging.getLogger("fftcrystal.imaging")

# leading bytes of the formats we read
MAGICS = {b"P5": "PGM", b"P6": "PPM", b"\x89PNG\r\n\x1a\n": "PNG"}
SAVE_FORMATS = {".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM", ".png": "PNG"}


def _sniff(path: Path) -> str:
    with path.open("rb") as f:
        head = f.read(8)
    for magic, name in MAGICS.items():
        if head.startswith(magic):
            return name
    if head[:1] == b"P" and head[1:2].isdigit():
        raise UnsupportedFormatError(f"{path}: netpbm variant {head[:2].decode()} is not supported (binary P5/P6 only)")
    if not head:
        raise TruncatedStreamError(f"{path}: empty file")
    raise BadMagicError(f"{path}: not a PGM, PPM or PNG file")


def load_image(path: Path) -> np.ndarray:
    """8-bit grayscale -> (H, W), RGB -> (H, W, 3), as float64 pixel values."""
    path = Path(path)
    kind = _sniff(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGBA", "LA", "PA") or (mode == "P" and "transparency" in im.info):
                logger.warning(f"{path.name}: alpha channel dropped")
                im = im.convert("RGB" if mode != "LA" else "L")
            elif mode == "P":
                im = im.convert("RGB")
            elif mode == "1":
                im = im.convert("L")
            if im.mode not in ("L", "RGB"):
                raise UnsupportedFormatError(f"{path.name}: {kind} mode {im.mode} is not 8-bit gray or RGB")
            arr = np.asarray(im, dtype=np.float64)
    except FormatError:
        raise
    except UnidentifiedImageError as e:
        raise BadMagicError(f"{path.name}: {kind} could not be decoded") from e
    except (OSError, SyntaxError, ValueError) as e:
        # Pillow reports short reads as OSError("image file is truncated ...")
        raise TruncatedStreamError(f"{path.name}: {kind} data is truncated or corrupt ({e})") from e
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{path.name}: empty image")
    return arr


def to_bytes(image: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half to even."""
    return np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 255.0)).astype(np.uint8)


def save_image(image: np.ndarray, path: Path) -> None:
    path = Path(path)
    fmt = SAVE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise UnsupportedFormatError(f"{path.name}: lossless .pgm, .ppm or .png only")
    arr = to_bytes(image)
    if arr.ndim == 2:
        mode = "L"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        mode = "RGB"
    else:
        raise InvalidInputError(f"cannot save an image of shape {arr.shape}")
    if path.suffix.lower() == ".pgm" and mode == "RGB":
        raise UnsupportedFormatError(f"{path.name}: PGM holds grayscale only, use .ppm or .png for RGB")
    Image.fromarray(arr).save(path, format=fmt)
