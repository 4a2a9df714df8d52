"""Portable float map (PFM) reader/writer.

File layout: magic "PF" (3-channel) or "Pf" (1-channel), ASCII width and
height, ASCII scale whose sign encodes endianness (negative = little-endian),
then the float32 raster stored bottom-to-top. The reader flips rows to
top-to-bottom [C,H,W] order; the writer inverts exactly, so
write(read(write(x))) is byte-identical.
"""

from __future__ import annotations

import numpy as np

from .validation import ParseError, ShapeError

_MAGICS = {b"PF": 3, b"Pf": 1}


def _next_token(data: bytes, pos: int):
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    if pos >= len(data):
        raise ParseError("unexpected end of header", offset=pos)
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], start, pos


def read_pfm(data: bytes):
    """Parse PFM bytes into (tensor[C,H,W] float32, scale). Strict: rejects
    bad magic, malformed dimensions, zero/non-finite scale, truncated or
    oversized rasters, always with the byte offset of the problem."""
    magic, magic_at, pos = _next_token(data, 0)
    if magic not in _MAGICS:
        raise ParseError(f"bad magic {magic!r}, expected 'PF' or 'Pf'", offset=magic_at)
    channels = _MAGICS[magic]

    dims = []
    for name in ("width", "height"):
        tok, at, pos = _next_token(data, pos)
        try:
            value = int(tok)
        except ValueError:
            raise ParseError(f"{name} is not an integer: {tok!r}", offset=at) from None
        if value <= 0:
            raise ParseError(f"{name} must be positive, got {value}", offset=at)
        dims.append(value)
    w, h = dims

    tok, at, pos = _next_token(data, pos)
    try:
        scale = float(tok)
    except ValueError:
        raise ParseError(f"scale is not a number: {tok!r}", offset=at) from None
    if not np.isfinite(scale) or scale == 0.0:
        raise ParseError(f"scale must be finite and non-zero, got {scale}", offset=at)

    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ParseError("missing separator after scale", offset=pos)
    raster_at = pos + 1

    expected = w * h * channels * 4
    got = len(data) - raster_at
    if got < expected:
        raise ParseError(
            f"truncated raster: expected {expected} bytes, got {got}",
            offset=len(data),
        )
    if got > expected:
        raise ParseError(
            f"{got - expected} trailing bytes after raster", offset=raster_at + expected
        )

    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    flat = np.frombuffer(data, dtype=dtype, count=w * h * channels, offset=raster_at)
    raster = flat.reshape(h, w, channels)[::-1]  # bottom-to-top on disk
    tensor = np.ascontiguousarray(raster.transpose(2, 0, 1)).astype(
        np.float32, copy=False
    )
    return tensor, scale


def write_pfm(tensor: np.ndarray, scale: float = -1.0) -> bytes:
    """Serialize a float32 [C,H,W] tensor (C = 1 or 3) to PFM bytes."""
    if tensor.ndim != 3 or tensor.shape[0] not in (1, 3):
        raise ShapeError(f"expected [1|3,H,W] tensor, got shape {tensor.shape}")
    if tensor.dtype != np.float32:
        raise ValueError(f"PFM stores float32, got {tensor.dtype}")
    if not np.all(np.isfinite(tensor)):
        raise ValueError("tensor contains non-finite values")
    scale = float(scale)
    if not np.isfinite(scale) or scale == 0.0:
        raise ValueError(f"scale must be finite and non-zero, got {scale}")

    c, h, w = tensor.shape
    magic = "PF" if c == 3 else "Pf"
    header = f"{magic}\n{w} {h}\n{scale!r}\n".encode("ascii")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    raster = tensor.transpose(1, 2, 0)[::-1].astype(dtype, copy=False)
    return header + raster.tobytes()


def read_pfm_file(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as f:
        return read_pfm(f.read())


def write_pfm_file(path, tensor: np.ndarray, scale: float = -1.0) -> None:
    with open(path, "wb") as f:
        f.write(write_pfm(tensor, scale))
