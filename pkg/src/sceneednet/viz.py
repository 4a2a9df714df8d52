"""Static per-axis visualization: symmetric blue-white-red diverging colormap."""

from __future__ import annotations

import numpy as np

from .validation import ShapeError, check_hw

MID_GRAY = 128


def colorize_channel(values: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Map one scalar channel to a uint8 [H,W,3] image.

    The color range is the channel's max absolute value over valid pixels:
    -range is saturated blue, 0 white, +range saturated red. A zero range
    yields uniform mid-gray. Invalid pixels come out black.
    """
    check_hw(values, "values")
    if valid is not None and valid.shape != values.shape:
        raise ShapeError(f"valid shape {valid.shape} != values {values.shape}")
    v = np.asarray(values, dtype=np.float64)
    pool = v if valid is None else v[valid]
    rng = float(np.abs(pool).max()) if pool.size else 0.0

    h, w = v.shape
    if rng == 0.0:
        img = np.full((h, w, 3), MID_GRAY, dtype=np.uint8)
    else:
        t = np.clip(v / rng, -1.0, 1.0)
        r = np.where(t >= 0, 255.0, 255.0 * (1.0 + t))
        g = 255.0 * (1.0 - np.abs(t))
        b = np.where(t <= 0, 255.0, 255.0 * (1.0 - t))
        img = np.rint(np.stack([r, g, b], axis=-1)).astype(np.uint8)
    if valid is not None:
        img[~valid] = 0
    return img


def colorize_field(flow: np.ndarray, valid: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Colorize a [3,H,W] scene-flow field into per-axis images keyed x/y/z."""
    if flow.ndim != 3 or flow.shape[0] != 3:
        raise ShapeError(f"flow must be [3,H,W], got {flow.shape}")
    return {
        axis: colorize_channel(flow[i], valid) for i, axis in enumerate(("x", "y", "z"))
    }
