"""File formats: real vectors, packed bits, JSON sidecars and binary PGM.

Vector and bit files share a 16-byte header (12-byte magic, little-endian
uint32 version) followed by a little-endian uint64 length.  Vectors then hold
float64 LE values; bit files hold ``ceil(length/8)`` bytes packed LSB first.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import struct

import numpy as np

VECTOR_MAGIC = b"MODRECON-VEC"
BITS_MAGIC = b"MODRECON-BIT"
VERSION = 1
_HEADER = struct.Struct("<12sIQ")


class FormatError(ValueError):
    """Malformed file; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


def _write(path, magic, length, payload: bytes):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, VERSION, length))
        fh.write(payload)


def _read(path, magic):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", len(data))
    got, version, length = _HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", 12)
    return length, data[_HEADER.size:]


def write_vector(path, values):
    v = np.ascontiguousarray(values, dtype="<f8").reshape(-1)
    _write(path, VECTOR_MAGIC, v.size, v.tobytes())


def read_vector(path) -> np.ndarray:
    length, body = _read(path, VECTOR_MAGIC)
    if len(body) != 8 * length:
        raise FormatError(f"{path}: expected {8 * length} payload bytes, found {len(body)}",
                          _HEADER.size + min(len(body), 8 * length))
    return np.frombuffer(body, dtype="<f8").astype(np.float64)


def write_bits(path, bits):
    b = np.asarray(bits, dtype=np.uint8).reshape(-1)
    _write(path, BITS_MAGIC, b.size, np.packbits(b, bitorder="little").tobytes())


def read_bits(path) -> np.ndarray:
    length, body = _read(path, BITS_MAGIC)
    need = (length + 7) // 8
    if len(body) != need:
        raise FormatError(f"{path}: expected {need} packed bytes, found {len(body)}",
                          _HEADER.size + min(len(body), need))
    return np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=length, bitorder="little")


def sidecar_path(path) -> str:
    return os.fspath(path) + ".json"


def write_sidecar(path, meta: dict):
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path) -> dict:
    side = sidecar_path(path)
    try:
        with open(side, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"missing sidecar {side}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: invalid JSON: {exc.msg}", exc.pos) from None


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


def load_pgm(path) -> np.ndarray:
    """Binary (P5) 8-bit PGM to a float array of pixel values in [0, 255]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {data[:2]!r})", 0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        if pos >= len(data) or not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            raise FormatError(f"{path}: expected whitespace before {name}", pos)
        pos = _TOKEN.match(data, pos).end()
        m = re.compile(rb"\d+").match(data, pos)
        if not m:
            raise FormatError(f"{path}: expected an integer {name}", pos)
        fields.append(int(m.group()))
        pos = m.end()
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}", pos)
    if width < 1 or height < 1:
        raise FormatError(f"{path}: empty image {width}x{height}", pos)
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after header", pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise FormatError(f"{path}: truncated pixel data, need {need} bytes, have {len(data) - pos}",
                          len(data))
    return np.frombuffer(data, np.uint8, need, pos).reshape(height, width).astype(np.float64)


def save_pgm(image, path):
    """Write a P5 PGM; values are rounded half to even and clamped to [0, 255].

    NaN pixels are written as 0 (a failed reconstruction should still be viewable).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    img = np.nan_to_num(img, nan=0.0, posinf=255.0, neginf=0.0)
    px = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (px.shape[1], px.shape[0]))
        fh.write(px.tobytes())
