# src/fftcrystal/stego/keyfile.py
"""
Key file, little-endian:

    magic "ISMSKEY\\0" | version u16 | channels u16 | W u32 | H u32 | alpha f64 | beta f64
    engine: k1 k2 k3 f64 | sigma_floor f64 | epsilon 3 x f64 | max_iterations u32 | seed_count u32
            | rng_seed i64 | density_bins u32 | tile_size f64 | allow_any_feedback u8
    per channel: code u8 | H*W complex coefficients as (re f64, im f64), row-major, centered
"""
from __future__ import annotations

import struct

import numpy as np
from pydantic import ValidationError

from ..config import EngineParams, FeedbackConstants
from ..dictionary.codec import CHANNEL_CODES, CODE_CHANNELS, ByteReader
from ..errors import BadMagicError, FormatError, InvalidInputError, VersionMismatchError
from ..spectral.topology import PlaneDims
from ..spectral.transform import Spectrum
from .embed import StegoKey, StegoParams

MAGIC = b"ISMSKEY\0"
VERSION = 2

_HEADER = struct.Struct("<8sHHIIdd")
_ENGINE = struct.Struct("<dddd3dIIqIdB")
_CODE = struct.Struct("<B")


def serialize_key(key: StegoKey) -> bytes:
    p = key.params
    e = p.engine
    parts = [
        _HEADER.pack(MAGIC, VERSION, len(key.channels), key.dims.W, key.dims.H, p.alpha, p.beta),
        _ENGINE.pack(e.k.k1, e.k.k2, e.k.k3, e.sigma_floor, *e.epsilon, e.max_iterations, e.seed_count,
                     e.rng_seed, e.density_bins, e.tile_size, int(e.allow_any_feedback)),
    ]
    for ch, spec in zip(key.channels, key.spectra):
        parts.append(_CODE.pack(CHANNEL_CODES[ch]))
        parts.append(np.ascontiguousarray(spec.coeffs, dtype="<c16").tobytes())
    return b"".join(parts)


def deserialize_key(data: bytes) -> StegoKey:
    r = ByteReader(data, "key file")
    if len(data) >= len(MAGIC) and bytes(data[:len(MAGIC)]) != MAGIC:
        raise BadMagicError("not a key file (bad magic)")
    _, version, n_channels, W, H, alpha, beta = r.unpack(_HEADER)
    if version != VERSION:
        raise VersionMismatchError(f"key file version {version}, this build reads {VERSION}")
    k1, k2, k3, floor, e1, e2, e3, max_it, seeds, rng_seed, bins, tile, allow_any = r.unpack(_ENGINE)
    try:
        dims = PlaneDims(W=W, H=H)
        engine = EngineParams(
            k=FeedbackConstants(k1=k1, k2=k2, k3=k3), sigma_floor=floor, epsilon=(e1, e2, e3),
            max_iterations=max_it, seed_count=seeds, rng_seed=rng_seed, density_bins=bins, tile_size=tile,
            allow_any_feedback=bool(allow_any),
        )
        params = StegoParams(alpha=alpha, beta=beta, engine=engine)
    except (ValidationError, InvalidInputError) as e:
        raise FormatError(f"key file carries invalid parameters: {e}") from e

    channels, spectra = [], []
    for _ in range(n_channels):
        (code,) = r.unpack(_CODE)
        if code not in CODE_CHANNELS:
            raise FormatError(f"unknown channel code {code}")
        channels.append(CODE_CHANNELS[code])
        spectra.append(Spectrum(coeffs=r.array("<c16", W * H).reshape(dims.shape)))
    r.finish()
    if not channels:
        raise FormatError("key file holds no channels")
    return StegoKey(spectra=tuple(spectra), channels=tuple(channels), params=params)
