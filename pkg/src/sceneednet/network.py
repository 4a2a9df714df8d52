"""SceneEDNet: declarative 11-layer encoder-decoder construction, forward,
backward, and checkpoint persistence.

The encoder halves resolution four times while doubling channels
(12 -> 64 -> 128 -> 256 -> 512 -> 1024); two stride-1 layers sit at the
bottleneck; the decoder alternates 2x nearest-neighbor upsampling with
stride-1 convolution, halving channels back down to 64. A center crop then
restores the exact input resolution (upsampling can overshoot by a few rows,
e.g. 544x960 for a 540x960 input) and a final linear 3-channel convolution
regresses the scene-flow vector at every pixel.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .ops import (
    ConvParams,
    conv2d_out_hw,
    conv2d_backward,
    conv2d_forward,
    crop_center,
    crop_center_backward,
    leaky_relu,
    leaky_relu_backward,
    upsample2x_backward,
    upsample2x_forward,
)
from .validation import CheckpointError, ShapeError, check_chw, check_finite

CHECKPOINT_MAGIC = b"SEDN"
CHECKPOINT_VERSION = 1

KINDS = ("conv-down", "conv-same", "upconv", "output-conv", "crop")
MIN_INPUT_EXTENT = 16


@dataclass(frozen=True)
class LayerSpec:
    """One layer: convolution variant (or the crop), channels, activation."""

    name: str
    kind: str
    in_ch: int
    out_ch: int
    alpha: float | None = None  # leaky-ReLU slope; None = no activation

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.in_ch < 1 or self.out_ch < 1:
            raise ValueError(f"{self.name}: channel counts must be positive")
        if self.kind == "crop":
            if self.in_ch != self.out_ch or self.alpha is not None:
                raise ValueError("crop layer cannot change channels or activate")
        if self.alpha is not None and not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"{self.name}: alpha must be in [0, 1), got {self.alpha}")


@dataclass(frozen=True)
class NetworkSpec:
    """The full layer chain: 4 downsampling, 2 bottleneck, 4 upsampling
    convolutions, a crop back to input resolution, and the 3-channel output."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        counts = {}
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.in_ch != prev.out_ch:
                raise ValueError(
                    f"channel chain broken at {cur.name}: in_ch {cur.in_ch} "
                    f"!= previous out_ch {prev.out_ch}"
                )
        for layer in self.layers:
            counts[layer.kind] = counts.get(layer.kind, 0) + 1
        expected = {"conv-down": 4, "conv-same": 2, "upconv": 4, "crop": 1, "output-conv": 1}
        if counts != expected:
            raise ValueError(f"layer-kind census {counts} != required {expected}")
        for down in (l for l in self.layers if l.kind == "conv-down"):
            if down.name != "conv0" and down.out_ch != 2 * down.in_ch:
                raise ValueError(f"{down.name}: downsampling must double channels")
        for up in (l for l in self.layers if l.kind == "upconv"):
            if up.out_ch * 2 != up.in_ch:
                raise ValueError(f"{up.name}: upsampling must halve channels")
        out = self.layers[-1]
        if out.kind != "output-conv" or out.out_ch != 3 or out.alpha is not None:
            raise ValueError("final layer must be a linear 3-channel convolution")


def default_network_spec(alpha: float = 0.1) -> NetworkSpec:
    def conv(name, kind, cin, cout, act=True):
        return LayerSpec(name, kind, cin, cout, alpha if act else None)

    return NetworkSpec(
        layers=(
            conv("conv0", "conv-down", 12, 64),
            conv("conv1", "conv-down", 64, 128),
            conv("conv1_1", "conv-down", 128, 256),
            conv("conv2", "conv-down", 256, 512),
            conv("conv2_1", "conv-same", 512, 1024),
            conv("conv3", "conv-same", 1024, 1024),
            conv("conv3_1", "upconv", 1024, 512),
            conv("conv4", "upconv", 512, 256),
            conv("conv4_1", "upconv", 256, 128),
            conv("conv5", "upconv", 128, 64),
            LayerSpec("crop", "crop", 64, 64),
            conv("output", "output-conv", 64, 3, act=False),
        )
    )


def layer_shapes(spec: NetworkSpec, in_h: int, in_w: int) -> list[tuple[str, int, int, int]]:
    """Propagate (C, H, W) through every layer; entries are layer outputs."""
    if in_h < MIN_INPUT_EXTENT or in_w < MIN_INPUT_EXTENT:
        raise ShapeError(
            f"input must be at least {MIN_INPUT_EXTENT}x{MIN_INPUT_EXTENT}, "
            f"got {in_h}x{in_w}"
        )
    h, w = in_h, in_w
    out = []
    for layer in spec.layers:
        if layer.kind == "conv-down":
            h, w = conv2d_out_hw(h, w, stride=2, pad=1)
        elif layer.kind == "upconv":
            h, w = conv2d_out_hw(2 * h, 2 * w, stride=1, pad=1)
        elif layer.kind == "crop":
            if h < in_h or w < in_w:
                raise ShapeError(
                    f"{layer.name}: cannot crop {h}x{w} up to {in_h}x{in_w}"
                )
            h, w = in_h, in_w
        # conv-same / output-conv keep H, W (stride 1, pad 1, 3x3)
        if h < 1 or w < 1:
            raise ShapeError(f"spatial extent collapsed to {h}x{w} at {layer.name}")
        out.append((layer.name, layer.out_ch, h, w))
    return out


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations retained for the backward pass."""

    input_hw: tuple[int, int]
    inputs: list
    preacts: list
    out_shape: tuple[int, int, int]


class Network:
    """An initialized SceneEDNet: spec plus per-layer parameters (None for crop)."""

    def __init__(self, spec: NetworkSpec, params: list):
        if len(params) != len(spec.layers):
            raise ValueError("one parameter entry per layer required")
        for layer, p in zip(spec.layers, params):
            if layer.kind == "crop":
                if p is not None:
                    raise ValueError("crop layer carries no parameters")
                continue
            if p.out_ch != layer.out_ch or p.in_ch != layer.in_ch:
                raise ShapeError(f"{layer.name}: parameter channels do not match spec")
        self.spec = spec
        self.params = list(params)

    @property
    def dtype(self):
        return next(p.weights.dtype for p in self.params if p is not None)

    def iter_params(self):
        """Yield (layer_index, ConvParams) for every parameterized layer."""
        for i, p in enumerate(self.params):
            if p is not None:
                yield i, p

    @property
    def num_params(self) -> int:
        return sum(p.weights.size + p.bias.size for _, p in self.iter_params())

    def forward(self, x: np.ndarray, want_cache: bool = True):
        """Run the network; returns (output, cache). cache is None when not
        requested (saves several hundred MB at full resolution)."""
        check_chw(x, "input", channels=self.spec.layers[0].in_ch)
        in_h, in_w = x.shape[1], x.shape[2]
        layer_shapes(self.spec, in_h, in_w)  # validates admissibility
        if x.dtype != self.dtype:
            raise ValueError(f"input dtype {x.dtype} != network dtype {self.dtype}")

        inputs, preacts = [], []
        a = x
        for layer, p in zip(self.spec.layers, self.params):
            if layer.kind == "crop":
                inputs.append(a.shape)
                preacts.append(None)
                a = crop_center(a, in_h, in_w)
                continue
            conv_in = upsample2x_forward(a) if layer.kind == "upconv" else a
            z = conv2d_forward(conv_in, p)
            if want_cache:
                inputs.append(a)
                preacts.append(z if layer.alpha is not None else None)
            else:
                inputs.append(None)
                preacts.append(None)
            a = leaky_relu(z, layer.alpha) if layer.alpha is not None else z
        check_finite(a, "network output")
        cache = (
            ForwardCache(input_hw=(in_h, in_w), inputs=inputs, preacts=preacts,
                         out_shape=a.shape)
            if want_cache
            else None
        )
        return a, cache

    def backward(self, cache: ForwardCache, grad_output: np.ndarray):
        """Reverse sweep; returns per-layer gradients: None for the crop,
        (grad_weights, grad_bias) elsewhere, aligned with spec.layers."""
        if cache is None:
            raise ValueError("backward requires a cache from forward(want_cache=True)")
        if grad_output.shape != cache.out_shape:
            raise ShapeError(
                f"grad_output shape {grad_output.shape} != output {cache.out_shape}"
            )
        grads = [None] * len(self.spec.layers)
        g = grad_output
        for i in range(len(self.spec.layers) - 1, -1, -1):
            layer = self.spec.layers[i]
            if layer.kind == "crop":
                _, src_h, src_w = cache.inputs[i]
                g = crop_center_backward(g, src_h, src_w)
                continue
            if layer.alpha is not None:
                g = leaky_relu_backward(cache.preacts[i], g, layer.alpha)
            layer_in = cache.inputs[i]
            if layer.kind == "upconv":
                conv_in = upsample2x_forward(layer_in)  # cheap to recompute
                gx, gw, gb = conv2d_backward(conv_in, self.params[i], g)
                g = upsample2x_backward(gx)
            else:
                gx, gw, gb = conv2d_backward(layer_in, self.params[i], g)
                g = gx
            grads[i] = (gw, gb)
        return grads


def build_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Network:
    """Fan-in-scaled uniform init: weights ~ U(-b, b) with b = sqrt(6/(in_ch*9)),
    biases zero; fully determined by the seed."""
    rng = np.random.default_rng(seed)
    params = []
    for layer in spec.layers:
        if layer.kind == "crop":
            params.append(None)
            continue
        bound = np.sqrt(6.0 / (layer.in_ch * 9))
        weights = rng.uniform(-bound, bound, size=(layer.out_ch, layer.in_ch, 3, 3))
        params.append(
            ConvParams(
                weights=weights.astype(dtype),
                bias=np.zeros(layer.out_ch, dtype=dtype),
                stride=2 if layer.kind == "conv-down" else 1,
                pad=1,
            )
        )
    return Network(spec, params)


@dataclass
class Checkpoint:
    net: Network
    epoch: int
    velocities: list | None


def _spec_to_json(spec: NetworkSpec, epoch: int, has_velocities: bool) -> bytes:
    layers = [
        {"name": l.name, "kind": l.kind, "in_ch": l.in_ch, "out_ch": l.out_ch,
         "alpha": l.alpha}
        for l in spec.layers
    ]
    doc = {"layers": layers, "epoch": epoch, "has_velocities": has_velocities}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, net: Network, epoch: int = 0, velocities: list | None = None):
    """Write magic, version, JSON spec header, then float32 little-endian
    weights and biases per layer (momentum buffers appended when present).
    float64 networks are stored at float32 precision."""
    header = _spec_to_json(net.spec, epoch, velocities is not None)
    blobs = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION),
             struct.pack("<I", len(header)), header]
    for _, p in net.iter_params():
        blobs.append(p.weights.astype("<f4", copy=False).tobytes())
        blobs.append(p.bias.astype("<f4", copy=False).tobytes())
    if velocities is not None:
        for i, p in net.iter_params():
            vw, vb = velocities[i]
            if vw.shape != p.weights.shape or vb.shape != p.bias.shape:
                raise CheckpointError(f"velocity shapes do not match layer {i}")
            blobs.append(vw.astype("<f4", copy=False).tobytes())
            blobs.append(vb.astype("<f4", copy=False).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(blobs))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<I", data, 8)
    if len(data) < 12 + header_len:
        raise CheckpointError("truncated checkpoint header")
    try:
        doc = json.loads(data[12 : 12 + header_len].decode("utf-8"))
        layers = tuple(
            LayerSpec(name=l["name"], kind=l["kind"], in_ch=l["in_ch"],
                      out_ch=l["out_ch"], alpha=l["alpha"])
            for l in doc["layers"]
        )
        spec = NetworkSpec(layers=layers)
        epoch = int(doc["epoch"])
        has_velocities = bool(doc["has_velocities"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise CheckpointError(f"malformed checkpoint header: {e}") from e

    pos = 12 + header_len

    def take(count):
        nonlocal pos
        nbytes = count * 4
        if pos + nbytes > len(data):
            raise CheckpointError(
                f"truncated checkpoint: needed {nbytes} bytes at offset {pos}"
            )
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        return arr.astype(np.float32, copy=False)

    params = []
    for layer in spec.layers:
        if layer.kind == "crop":
            params.append(None)
            continue
        w = take(layer.out_ch * layer.in_ch * 9).reshape(layer.out_ch, layer.in_ch, 3, 3)
        b = take(layer.out_ch)
        params.append(
            ConvParams(weights=w.copy(), bias=b.copy(),
                       stride=2 if layer.kind == "conv-down" else 1, pad=1)
        )
    velocities = None
    if has_velocities:
        velocities = [None] * len(spec.layers)
        for i, layer in enumerate(spec.layers):
            if layer.kind == "crop":
                continue
            vw = take(layer.out_ch * layer.in_ch * 9).reshape(
                layer.out_ch, layer.in_ch, 3, 3
            )
            vb = take(layer.out_ch)
            velocities[i] = (vw.copy(), vb.copy())
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes in checkpoint")
    return Checkpoint(net=Network(spec, params), epoch=epoch, velocities=velocities)
