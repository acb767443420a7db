# src/fftcrystal/dictionary/codec.py
"""
Dictionary file, little-endian throughout:

    header   magic "ISMSDICT" | version u16 | channels u16 | W u32 | H u32 | mask_radius f64
    channel  code u8 | entries u32 | passthrough u32
             entries x (cluster_id i64 | mean f64 | members u32 | members x (u i32, v i32))
             passthrough x (u i32, v i32) | passthrough x f64 | H*W phase f64 (row-major)
"""
from __future__ import annotations

import struct
from typing import List, Sequence

import numpy as np

from ..errors import BadMagicError, FormatError, InvalidInputError, TruncatedStreamError, VersionMismatchError
from ..spectral.topology import PlaneDims
from ..spectral.transform import Channel
from .sparse import DictionaryEntry, MagnitudeDictionary, check_coverage

MAGIC = b"ISMSDICT"
VERSION = 1

_HEADER = struct.Struct("<8sHHIId")
_CHANNEL = struct.Struct("<BII")
_ENTRY = struct.Struct("<qdI")

CHANNEL_CODES = {Channel.GRAY: 0, Channel.R: 1, Channel.G: 2, Channel.B: 3}
CODE_CHANNELS = {v: k for k, v in CHANNEL_CODES.items()}


class ByteReader:
    """Cursor over a byte string; running out of bytes is a truncation error."""

    def __init__(self, data: bytes, what: str):
        self.data = memoryview(data)
        self.pos = 0
        self.what = what

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedStreamError(f"{self.what} truncated at byte {self.pos} (wanted {n} more)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.what} has {len(self.data) - self.pos} trailing bytes")


def serialize(dicts: Sequence[MagnitudeDictionary]) -> bytes:
    if not dicts:
        raise InvalidInputError("nothing to serialize")
    first = dicts[0]
    for d in dicts[1:]:
        if d.dims != first.dims or d.mask_radius != first.mask_radius:
            raise InvalidInputError("all channels of a dictionary file share dims and mask radius")
    parts: List[bytes] = [_HEADER.pack(MAGIC, VERSION, len(dicts), first.dims.W, first.dims.H, first.mask_radius)]
    for d in dicts:
        check_coverage(d)
        parts.append(_CHANNEL.pack(CHANNEL_CODES[d.channel], len(d.entries), len(d.passthrough_uv)))
        for e in d.entries:
            parts.append(_ENTRY.pack(e.cluster_id, e.mean, len(e.members)))
            parts.append(np.ascontiguousarray(e.members, dtype="<i4").tobytes())
        parts.append(np.ascontiguousarray(d.passthrough_uv, dtype="<i4").tobytes())
        parts.append(np.ascontiguousarray(d.passthrough_mag, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(d.phase_grid, dtype="<f8").tobytes())
    return b"".join(parts)


def deserialize(data: bytes) -> List[MagnitudeDictionary]:
    r = ByteReader(data, "dictionary file")
    if len(data) >= len(MAGIC) and bytes(data[:len(MAGIC)]) != MAGIC:
        raise BadMagicError("not a dictionary file (bad magic)")
    magic, version, n_channels, W, H, mask_radius = r.unpack(_HEADER)
    if version != VERSION:
        raise VersionMismatchError(f"dictionary file version {version}, this build reads {VERSION}")
    if n_channels == 0:
        raise FormatError("dictionary file holds no channels")
    try:
        dims = PlaneDims(W=W, H=H)
    except InvalidInputError as e:
        raise FormatError(f"dictionary file declares an invalid grid: {e}") from e

    out: List[MagnitudeDictionary] = []
    for _ in range(n_channels):
        code, n_entries, n_pass = r.unpack(_CHANNEL)
        if code not in CODE_CHANNELS:
            raise FormatError(f"unknown channel code {code}")
        entries = []
        for _ in range(n_entries):
            cid, mean, n = r.unpack(_ENTRY)
            members = r.array("<i4", 2 * n).reshape(n, 2).astype(np.int64)
            entries.append(DictionaryEntry(cluster_id=cid, mean=mean, members=members))
        uv = r.array("<i4", 2 * n_pass).reshape(n_pass, 2).astype(np.int64)
        mag = r.array("<f8", n_pass)
        phase = r.array("<f8", W * H).reshape(H, W)
        d = MagnitudeDictionary(dims=dims, mask_radius=mask_radius, entries=tuple(entries),
                                passthrough_uv=uv, passthrough_mag=mag, phase_grid=phase,
                                channel=CODE_CHANNELS[code])
        check_coverage(d)
        out.append(d)
    r.finish()
    return out
