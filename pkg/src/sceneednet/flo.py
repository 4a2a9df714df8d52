"""Middlebury .flo optical-flow format.

Little-endian throughout: float32 magic 202021.25, int32 width, int32 height,
then interleaved (u, v) float32 pairs, row-major top-to-bottom.
"""

from __future__ import annotations

import struct

import numpy as np

from .validation import ParseError, ShapeError

MAGIC = 202021.25


def read_flo(data: bytes) -> np.ndarray:
    """Parse .flo bytes into a [2,H,W] float32 tensor (channel 0 = u)."""
    if len(data) < 12:
        raise ParseError(f"header needs 12 bytes, got {len(data)}", offset=len(data))
    (magic,) = struct.unpack_from("<f", data, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    w, h = struct.unpack_from("<ii", data, 4)
    if w <= 0:
        raise ParseError(f"width must be positive, got {w}", offset=4)
    if h <= 0:
        raise ParseError(f"height must be positive, got {h}", offset=8)

    expected = w * h * 2 * 4
    got = len(data) - 12
    if got < expected:
        raise ParseError(
            f"truncated raster: expected {expected} bytes, got {got}",
            offset=len(data),
        )
    if got > expected:
        raise ParseError(f"{got - expected} trailing bytes after raster", offset=12 + expected)

    flat = np.frombuffer(data, dtype="<f4", count=w * h * 2, offset=12)
    return np.ascontiguousarray(flat.reshape(h, w, 2).transpose(2, 0, 1)).astype(
        np.float32, copy=False
    )


def write_flo(tensor: np.ndarray) -> bytes:
    """Serialize a [2,H,W] float32 flow tensor to .flo bytes."""
    if tensor.ndim != 3 or tensor.shape[0] != 2:
        raise ShapeError(f"expected [2,H,W] tensor, got shape {tensor.shape}")
    if tensor.dtype != np.float32:
        raise ValueError(f".flo stores float32, got {tensor.dtype}")
    _, h, w = tensor.shape
    header = struct.pack("<fii", MAGIC, w, h)
    return header + tensor.transpose(1, 2, 0).astype("<f4", copy=False).tobytes()


def read_flo_file(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_flo(f.read())


def write_flo_file(path, tensor: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(write_flo(tensor))
