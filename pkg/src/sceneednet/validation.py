"""Shared error types and array validation helpers."""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "ParseError",
    "CheckpointError",
    "DataError",
    "check_chw",
    "check_hw",
    "check_finite",
]


class ShapeError(ValueError):
    """An array does not have the shape an operation requires."""


class ParseError(ValueError):
    """A binary or text payload is malformed.

    `offset` is the byte position at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CheckpointError(ValueError):
    """A checkpoint file is malformed or incompatible."""


class DataError(RuntimeError):
    """Dataset content is missing, unreadable, or inconsistent."""


def check_chw(a: np.ndarray, name: str, *, channels: int | None = None) -> np.ndarray:
    """Require a 3-d [channels, height, width] array with positive extents."""
    a = np.asarray(a)
    if a.ndim != 3:
        raise ShapeError(f"{name}: expected 3 axes [C,H,W], got shape {a.shape}")
    if min(a.shape) < 1:
        raise ShapeError(f"{name}: all extents must be >= 1, got shape {a.shape}")
    if channels is not None and a.shape[0] != channels:
        raise ShapeError(
            f"{name}: expected {channels} channels on axis 0, got {a.shape[0]}"
        )
    return a


def check_hw(a: np.ndarray, name: str) -> np.ndarray:
    """Require a 2-d [height, width] array with positive extents."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"{name}: expected 2 axes [H,W], got shape {a.shape}")
    if min(a.shape) < 1:
        raise ShapeError(f"{name}: all extents must be >= 1, got shape {a.shape}")
    return a


def check_finite(a: np.ndarray, name: str) -> np.ndarray:
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: contains NaN or Inf")
    return a
