"""Stereo pinhole geometry: lifting image-space flow + disparities to 3D scene flow.

Coordinate convention: x right, y down, z forward (image-aligned camera frame).
Delta-y therefore follows image rows. All geometry runs in float64 so the
vectorized path reproduces a naive per-pixel evaluation bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import ShapeError, check_hw


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters plus the stereo baseline (world units)."""

    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float

    def __post_init__(self):
        for name in ("fx", "fy", "baseline"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ImageSpaceFlow:
    """Per-pixel (u, v, d0, d1) rasters: optical flow plus the two disparities.

    d1 holds the disparity raster at t+1 (sampled later at the flow-displaced
    location), or a same-pixel disparity-change raster when d1_is_change is set.
    """

    u: np.ndarray
    v: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    d1_is_change: bool = False

    def __post_init__(self):
        check_hw(self.u, "u")
        for name in ("v", "d0", "d1"):
            a = getattr(self, name)
            check_hw(a, name)
            if a.shape != self.u.shape:
                raise ShapeError(
                    f"{name} shape {a.shape} does not match u shape {self.u.shape}"
                )


@dataclass
class SceneFlowField:
    """World-space motion field: flow[3,H,W] = (dx, dy, dz) plus validity mask."""

    flow: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.flow.ndim != 3 or self.flow.shape[0] != 3:
            raise ShapeError(f"flow must be [3,H,W], got {self.flow.shape}")
        if self.valid.shape != self.flow.shape[1:]:
            raise ShapeError(
                f"valid mask shape {self.valid.shape} does not match "
                f"flow spatial shape {self.flow.shape[1:]}"
            )
        if self.valid.dtype != np.bool_:
            raise ValueError("valid mask must be boolean")
        if not np.all(np.isfinite(self.flow[:, self.valid])):
            raise ValueError("flow contains non-finite values at valid pixels")
        if self.flow[:, ~self.valid].any():
            raise ValueError("invalid pixels must carry exactly zero flow")

    @property
    def shape(self):
        return self.valid.shape


def disparity_to_depth(d, intr: CameraIntrinsics):
    """depth = fx * baseline / d. Non-positive disparity yields depth 0.

    Works elementwise on arrays; scalars in, scalar out. A zero depth is the
    invalid-pixel signal — callers mask rather than crash.
    """
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = intr.fx * intr.baseline / d
    depth = np.where(d > 0, depth, 0.0)
    return float(depth) if depth.ndim == 0 else depth


def backproject(px, py, depth, intr: CameraIntrinsics):
    """Inverse pinhole map: pixel + depth -> (X, Y, Z) in the camera frame."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (px - intr.cx) * depth / intr.fx
    y = (py - intr.cy) * depth / intr.fy
    if x.ndim == 0:
        return float(x), float(y), float(depth)
    return x, y, depth.astype(np.float64, copy=False)


def sample_bilinear(field: np.ndarray, x, y):
    """Bilinear interpolation of field[H,W] at real pixel coordinates.

    Returns (value, in_bounds). in_bounds is False when the query point lies
    outside [0, W-1] x [0, H-1]; the returned value is then a clamped
    extrapolation the caller should mask. Integer coordinates reproduce grid
    values exactly.
    """
    check_hw(field, "field")
    h, w = field.shape
    field = np.asarray(field, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 0 and y.ndim == 0

    in_bounds = (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)

    x0 = np.clip(np.floor(x), 0.0, max(w - 2, 0)).astype(np.int64)
    y0 = np.clip(np.floor(y), 0.0, max(h - 2, 0)).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0

    v00 = field[y0, x0]
    v01 = field[y0, x1]
    v10 = field[y1, x0]
    v11 = field[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    val = top * (1.0 - fy) + bot * fy

    if scalar:
        return float(val), bool(in_bounds)
    return val, in_bounds


def reconstruct_scene_flow(
    flow_u: np.ndarray,
    flow_v: np.ndarray,
    disp_t: np.ndarray,
    disp_t1: np.ndarray,
    intr: CameraIntrinsics,
    d1_is_change: bool = False,
) -> SceneFlowField:
    """Lift (u, v, d0, d1) to world-space scene flow P1 - P0.

    Per pixel p: P0 back-projects p at depth fB/d0; the t+1 disparity is
    bilinearly sampled at the flow-displaced position (p + (u,v)); P1
    back-projects that displaced position at depth fB/d1. Pixels are masked
    invalid (flow forced to exactly zero) when d0 <= 0, d1 <= 0, or the
    displaced sample falls out of bounds.

    With d1_is_change=True, disp_t1 is read as a same-pixel disparity-change
    raster instead: d1 = d0 + disp_t1[p], and no resampling (hence no
    out-of-bounds masking) applies.
    """
    check_hw(flow_u, "flow_u")
    for name, a in (("flow_v", flow_v), ("disp_t", disp_t), ("disp_t1", disp_t1)):
        check_hw(a, name)
        if a.shape != flow_u.shape:
            raise ShapeError(
                f"{name} shape {a.shape} does not match flow_u shape {flow_u.shape}"
            )

    h, w = flow_u.shape
    u = np.asarray(flow_u, dtype=np.float64)
    v = np.asarray(flow_v, dtype=np.float64)
    d0 = np.asarray(disp_t, dtype=np.float64)

    px = np.broadcast_to(np.arange(w, dtype=np.float64), (h, w))
    py = np.broadcast_to(np.arange(h, dtype=np.float64)[:, None], (h, w))
    x1p = px + u
    y1p = py + v

    if d1_is_change:
        d1 = d0 + np.asarray(disp_t1, dtype=np.float64)
        in_bounds = np.ones((h, w), dtype=bool)
    else:
        d1, in_bounds = sample_bilinear(disp_t1, x1p, y1p)

    valid = (d0 > 0) & (d1 > 0) & in_bounds

    depth0 = disparity_to_depth(d0, intr)
    depth1 = disparity_to_depth(d1, intr)
    x0c, y0c, z0c = backproject(px, py, depth0, intr)
    x1c, y1c, z1c = backproject(x1p, y1p, depth1, intr)

    flow = np.stack([x1c - x0c, y1c - y0c, z1c - z0c])
    flow[:, ~valid] = 0.0
    valid &= np.all(np.isfinite(flow), axis=0)
    flow[:, ~valid] = 0.0
    return SceneFlowField(flow=flow, valid=valid)
