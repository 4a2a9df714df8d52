"""Shared fixture helpers: synthetic textured-quad scenes written as dataset trees."""

from pathlib import Path

import numpy as np

from sceneednet.flo import write_flo_file
from sceneednet.images import write_png
from sceneednet.pfm import write_pfm_file


def paste(canvas: np.ndarray, patch: np.ndarray, y0: int, x0: int) -> None:
    """Copy patch onto canvas at (y0, x0), clipped to the canvas extent."""
    h, w = canvas.shape[:2]
    ph, pw = patch.shape[:2]
    ys, xs = max(y0, 0), max(x0, 0)
    ye, xe = min(y0 + ph, h), min(x0 + pw, w)
    if ys >= ye or xs >= xe:
        return
    canvas[ys:ye, xs:xe] = patch[ys - y0 : ye - y0, xs - x0 : xe - x0]


def region_mask(h: int, w: int, y0: int, x0: int, ph: int, pw: int) -> np.ndarray:
    m = np.zeros((h, w), dtype=bool)
    ys, xs = max(y0, 0), max(x0, 0)
    ye, xe = min(y0 + ph, h), min(x0 + pw, w)
    if ys < ye and xs < xe:
        m[ys:ye, xs:xe] = True
    return m


def build_scene(
    scene_dir: Path,
    rng: np.random.Generator,
    h: int = 48,
    w: int = 96,
    n_frames: int = 2,
    flow_fmt: str = "pfm",
) -> None:
    """Write one synthetic scene: a textured quad sliding over a textured
    background with a disparity change — rigid motion with known rasters."""
    left_dir = scene_dir / "left"
    right_dir = scene_dir / "right"
    flow_dir = scene_dir / "flow" / "left" / "into_future"
    disp_dir = scene_dir / "disparity" / "left"
    for d in (left_dir, right_dir, flow_dir, disp_dir):
        d.mkdir(parents=True, exist_ok=True)

    bg = rng.integers(0, 255, size=(h, w, 3), dtype=np.uint8)
    qh, qw = h // 3, w // 3
    quad = rng.integers(0, 255, size=(qh, qw, 3), dtype=np.uint8)
    y0 = int(rng.integers(2, h - qh - 4))
    x0 = int(rng.integers(2, w - qw - 6))
    du = int(rng.integers(1, 4))
    dv = int(rng.integers(-2, 3))
    db = float(rng.uniform(3.0, 6.0))
    df = float(rng.uniform(8.0, 14.0))
    ddisp = float(rng.uniform(0.5, 2.0)) * (1 if rng.random() < 0.5 else -1)

    def frame_geometry(k):
        return y0 + k * dv, x0 + k * du, df + k * ddisp

    for k in range(n_frames):
        qy, qx, dq = frame_geometry(k)
        left = bg.copy()
        paste(left, quad, qy, qx)
        right = np.roll(bg, -int(round(db)), axis=1)
        paste(right, quad, qy, qx - int(round(dq)))
        stem = f"{k:04d}"
        write_png(left_dir / f"{stem}.png", left)
        write_png(right_dir / f"{stem}.png", right)

        quad_mask = region_mask(h, w, qy, qx, qh, qw)
        disp = np.full((h, w), db, dtype=np.float32)
        disp[quad_mask] = dq
        write_pfm_file(disp_dir / f"{stem}.pfm", disp[None], -1.0)

        if k < n_frames - 1:
            u = np.zeros((h, w), dtype=np.float32)
            v = np.zeros((h, w), dtype=np.float32)
            u[quad_mask] = du
            v[quad_mask] = dv
            if flow_fmt == "flo":
                write_flo_file(flow_dir / f"{stem}.flo", np.stack([u, v]))
            else:
                flow3 = np.stack([u, v, np.zeros_like(u)])
                write_pfm_file(flow_dir / f"{stem}.pfm", flow3, -1.0)


def build_static_scene(scene_dir: Path, h: int = 16, w: int = 24, n_frames: int = 2) -> None:
    """Write a motionless scene: identical frames, zero flow, constant disparity."""
    left_dir = scene_dir / "left"
    right_dir = scene_dir / "right"
    flow_dir = scene_dir / "flow" / "left" / "into_future"
    disp_dir = scene_dir / "disparity" / "left"
    for d in (left_dir, right_dir, flow_dir, disp_dir):
        d.mkdir(parents=True, exist_ok=True)
    img = np.random.default_rng(0).integers(0, 255, size=(h, w, 3), dtype=np.uint8)
    disp = np.full((1, h, w), 5.0, dtype=np.float32)
    for k in range(n_frames):
        stem = f"{k:04d}"
        write_png(left_dir / f"{stem}.png", img)
        write_png(right_dir / f"{stem}.png", img)
        write_pfm_file(disp_dir / f"{stem}.pfm", disp, -1.0)
        if k < n_frames - 1:
            write_pfm_file(flow_dir / f"{stem}.pfm", np.zeros((3, h, w), np.float32), -1.0)


def write_camera_config(path: Path, h: int, w: int, fx: float = 50.0) -> Path:
    path.write_text(
        f"fx={fx}\nfy={fx}\ncx={(w - 1) / 2}\ncy={(h - 1) / 2}\nbaseline=1.0\n",
        encoding="utf-8",
    )
    return path


def build_dataset_tree(
    root: Path,
    seed: int = 0,
    splits: dict | None = None,
    h: int = 48,
    w: int = 96,
    n_frames: int = 2,
    flow_fmt: str = "pfm",
):
    """Create root/{split}/{scene}/... plus a camera config; returns (root, cfg)."""
    rng = np.random.default_rng(seed)
    for split, n_scenes in (splits or {"train": 1}).items():
        for i in range(n_scenes):
            build_scene(root / split / f"scene{i:02d}", rng, h, w, n_frames, flow_fmt)
    cfg = write_camera_config(root / "camera.cfg", h, w)
    return root, cfg


def touch_tree(scene_dir: Path, stems, kinds=("left", "right", "flow", "disp")) -> None:
    """Create empty placeholder files for index-only tests (never decoded)."""
    (scene_dir / "left").mkdir(parents=True, exist_ok=True)
    (scene_dir / "right").mkdir(parents=True, exist_ok=True)
    (scene_dir / "flow" / "left" / "into_future").mkdir(parents=True, exist_ok=True)
    (scene_dir / "disparity" / "left").mkdir(parents=True, exist_ok=True)
    for stem in stems:
        if "left" in kinds:
            (scene_dir / "left" / f"{stem}.png").touch()
        if "right" in kinds:
            (scene_dir / "right" / f"{stem}.png").touch()
        if "flow" in kinds:
            (scene_dir / "flow" / "left" / "into_future" / f"{stem}.pfm").touch()
        if "disp" in kinds:
            (scene_dir / "disparity" / "left" / f"{stem}.pfm").touch()
