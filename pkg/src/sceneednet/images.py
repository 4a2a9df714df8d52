"""RGB image decoding (PNG via Pillow, raw PPM natively) and input normalization."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .validation import ParseError, ShapeError


def _read_ppm(data: bytes) -> np.ndarray:
    """Raw (P6) PPM decoder, enough for dependency-light test fixtures."""
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":  # comment to end of line
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        if pos >= len(data):
            raise ParseError("unexpected end of PPM header", offset=pos)
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos], start

    magic, at = token()
    if magic != b"P6":
        raise ParseError(f"bad PPM magic {magic!r}", offset=at)
    fields = []
    for name in ("width", "height", "maxval"):
        tok, at = token()
        try:
            v = int(tok)
        except ValueError:
            raise ParseError(f"{name} is not an integer: {tok!r}", offset=at) from None
        if v <= 0:
            raise ParseError(f"{name} must be positive, got {v}", offset=at)
        fields.append(v)
    w, h, maxval = fields
    if maxval != 255:
        raise ParseError(f"only maxval 255 supported, got {maxval}", offset=at)
    raster_at = pos + 1
    expected = w * h * 3
    if len(data) - raster_at < expected:
        raise ParseError("truncated PPM raster", offset=len(data))
    flat = np.frombuffer(data, dtype=np.uint8, count=expected, offset=raster_at)
    return flat.reshape(h, w, 3)


def read_rgb(path) -> np.ndarray:
    """Decode a PNG or raw PPM file to a uint8 [3,H,W] tensor."""
    path = str(path)
    if path.lower().endswith(".ppm"):
        with open(path, "rb") as f:
            hwc = _read_ppm(f.read())
    else:
        with Image.open(path) as im:
            hwc = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return np.ascontiguousarray(hwc.transpose(2, 0, 1))


def write_png(path, image: np.ndarray) -> None:
    """Write a uint8 [H,W,3] image as PNG."""
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ShapeError(f"expected uint8 [H,W,3], got {image.dtype} {image.shape}")
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def normalize_rgb(img: np.ndarray) -> np.ndarray:
    """Map uint8 [3,H,W] to float32 in [-0.5, 0.5] via value/255 - 0.5."""
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 input, got {img.dtype}")
    return (img.astype(np.float32) / np.float32(255.0)) - np.float32(0.5)
