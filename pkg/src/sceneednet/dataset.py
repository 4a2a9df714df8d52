"""Dataset-tree indexing and sample assembly.

Expected layout (FlyingThings3D-style), per split train|val|test:

    root/{split}/{scene}/left/*.png            RGB frames, left camera
    root/{split}/{scene}/right/*.png           RGB frames, right camera
    root/{split}/{scene}/flow/left/into_future/*.pfm|*.flo   forward flow
    root/{split}/{scene}/disparity/left/*.pfm  per-frame disparity

One record pairs each frame with its successor within a scene (15 frames give
14 records). Records with a missing counterpart file are skipped with a
warning; an empty index is an error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flo import read_flo_file
from .geometry import CameraIntrinsics, ImageSpaceFlow, SceneFlowField, reconstruct_scene_flow
from .images import normalize_rgb, read_rgb
from .ops import concat_channels
from .pfm import read_pfm_file
from .validation import DataError

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
IMAGE_SUFFIXES = (".png", ".ppm")
FLOW_SUFFIXES = (".pfm", ".flo")


@dataclass(frozen=True)
class SampleRecord:
    """Paths for one consecutive-frame stereo sample."""

    scene: str
    frame: str
    left_t: Path
    right_t: Path
    left_t1: Path
    right_t1: Path
    flow: Path
    disp_t: Path
    disp_t1: Path


@dataclass(frozen=True)
class CameraConfig:
    intrinsics: CameraIntrinsics
    negate_disparity: bool = False


@dataclass
class Sample:
    """Network-ready pair: normalized 12-channel input and its world-space target."""

    input: np.ndarray
    target: SceneFlowField

    def __post_init__(self):
        if self.input.ndim != 3 or self.input.shape[0] != 12:
            raise DataError(f"sample input must be [12,H,W], got {self.input.shape}")
        if self.input.shape[1:] != self.target.shape:
            raise DataError(
                f"input resolution {self.input.shape[1:]} does not match "
                f"target {self.target.shape}"
            )


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def read_camera_config(path) -> CameraConfig:
    """Parse a key=value camera file (fx, fy, cx, cy, baseline[, negate_disparity])."""
    required = {"fx", "fy", "cx", "cy", "baseline"}
    values: dict[str, float] = {}
    negate = False
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "negate_disparity":
            try:
                negate = _BOOL_WORDS[value.lower()]
            except KeyError:
                raise DataError(f"{path}:{lineno}: bad boolean {value!r}") from None
        elif key in required:
            try:
                values[key] = float(value)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad number {value!r} for {key}") from None
        else:
            raise DataError(f"{path}:{lineno}: unknown key {key!r}")
    missing = required - values.keys()
    if missing:
        raise DataError(f"{path}: missing keys: {sorted(missing)}")
    try:
        intr = CameraIntrinsics(**values)
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None
    return CameraConfig(intrinsics=intr, negate_disparity=negate)


def _find_one(directory: Path, stem: str, suffixes) -> Path | None:
    for suffix in suffixes:
        candidate = directory / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def index_dataset(root, split: str) -> list[SampleRecord]:
    """Build the deterministic record list for one split of a dataset tree."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise DataError(f"split directory not found: {split_dir}")

    records: list[SampleRecord] = []
    for scene_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
        left_dir = scene_dir / "left"
        right_dir = scene_dir / "right"
        flow_dir = scene_dir / "flow" / "left" / "into_future"
        disp_dir = scene_dir / "disparity" / "left"
        if not left_dir.is_dir():
            logger.warning("scene %s has no left/ directory, skipping", scene_dir.name)
            continue
        stems = sorted(
            p.stem for p in left_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        for t, t1 in zip(stems, stems[1:]):
            paths = {
                "left_t": _find_one(left_dir, t, IMAGE_SUFFIXES),
                "right_t": _find_one(right_dir, t, IMAGE_SUFFIXES),
                "left_t1": _find_one(left_dir, t1, IMAGE_SUFFIXES),
                "right_t1": _find_one(right_dir, t1, IMAGE_SUFFIXES),
                "flow": _find_one(flow_dir, t, FLOW_SUFFIXES),
                "disp_t": _find_one(disp_dir, t, (".pfm",)),
                "disp_t1": _find_one(disp_dir, t1, (".pfm",)),
            }
            missing = [k for k, v in paths.items() if v is None]
            if missing:
                logger.warning(
                    "scene %s frame %s: missing %s, skipping pair",
                    scene_dir.name,
                    t,
                    ", ".join(missing),
                )
                continue
            records.append(SampleRecord(scene=scene_dir.name, frame=t, **paths))
    if not records:
        raise DataError(f"no usable samples under {split_dir}")
    return records


def _read_disparity(path, negate: bool) -> np.ndarray:
    tensor, _ = read_pfm_file(path)
    if tensor.shape[0] != 1:
        raise DataError(f"{path}: disparity must be 1-channel, got {tensor.shape[0]}")
    d = tensor[0].astype(np.float64)
    return -d if negate else d


def load_flow_and_disparity(rec: SampleRecord, negate_disparity: bool = False) -> ImageSpaceFlow:
    """Read the (u, v, d0, d1) rasters for one record."""
    if rec.flow.suffix.lower() == ".flo":
        flow = read_flo_file(rec.flow)
    else:
        tensor, _ = read_pfm_file(rec.flow)
        if tensor.shape[0] != 3:
            raise DataError(f"{rec.flow}: flow PFM must be 3-channel, got {tensor.shape[0]}")
        flow = tensor[:2]  # third channel unused
    u = flow[0].astype(np.float64)
    v = flow[1].astype(np.float64)
    d0 = _read_disparity(rec.disp_t, negate_disparity)
    d1 = _read_disparity(rec.disp_t1, negate_disparity)
    for name, a in (("v", v), ("d0", d0), ("d1", d1)):
        if a.shape != u.shape:
            raise DataError(
                f"{rec.scene}/{rec.frame}: raster {name} shape {a.shape} "
                f"does not match flow {u.shape}"
            )
    return ImageSpaceFlow(u=u, v=v, d0=d0, d1=d1)


def load_sample(rec: SampleRecord, config: CameraConfig) -> Sample:
    """Decode, normalize, and stack the four views; build the world-space target."""
    images = []
    shape = None
    for path in (rec.left_t, rec.right_t, rec.left_t1, rec.right_t1):
        try:
            img = read_rgb(path)
        except Exception as e:
            raise DataError(f"failed to decode {path}: {e}") from e
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DataError(f"{path}: resolution {img.shape[1:]} != {shape[1:]}")
        images.append(normalize_rgb(img))
    net_input = concat_channels(images)

    isf = load_flow_and_disparity(rec, config.negate_disparity)
    if isf.u.shape != shape[1:]:
        raise DataError(
            f"{rec.scene}/{rec.frame}: raster resolution {isf.u.shape} "
            f"does not match images {shape[1:]}"
        )
    field = reconstruct_scene_flow(isf.u, isf.v, isf.d0, isf.d1, config.intrinsics)
    target = SceneFlowField(flow=field.flow.astype(np.float32), valid=field.valid)
    return Sample(input=net_input, target=target)


class RecordDataset:
    """Lazy indexable view: record list + camera config -> Samples on demand."""

    def __init__(self, records: list[SampleRecord], config: CameraConfig):
        if not records:
            raise DataError("empty record list")
        self.records = list(records)
        self.config = config

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> Sample:
        return load_sample(self.records[i], self.config)
