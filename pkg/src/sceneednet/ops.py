"""Dense [C,H,W] tensor kernels with exact hand-written backward passes.

Feature maps are plain numpy arrays in [channels, height, width] order,
row-major, float32 in production and float64 for gradient checks. Every
kernel is deterministic: the contraction over input channels happens inside
one BLAS call per kernel tap, and taps accumulate in fixed row-major order,
so repeated evaluation on identical inputs is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import ShapeError, check_chw, check_finite

KERNEL_SIZE = 3


@dataclass(frozen=True)
class ConvParams:
    """Parameters of one 3x3 convolution.

    weights: [out_ch, in_ch, 3, 3]
    bias:    [out_ch]
    stride:  1 or 2
    pad:     symmetric zero padding, >= 0
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    pad: int = 1

    def __post_init__(self):
        w = self.weights
        if w.ndim != 4 or w.shape[2] != KERNEL_SIZE or w.shape[3] != KERNEL_SIZE:
            raise ShapeError(
                f"weights: expected [out_ch, in_ch, 3, 3], got shape {w.shape}"
            )
        if self.bias.shape != (w.shape[0],):
            raise ShapeError(
                f"bias: expected shape ({w.shape[0]},), got {self.bias.shape}"
            )
        if self.bias.dtype != w.dtype:
            raise ShapeError(
                f"bias dtype {self.bias.dtype} does not match weights {w.dtype}"
            )
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if self.pad < 0:
            raise ValueError(f"pad must be >= 0, got {self.pad}")

    @property
    def out_ch(self) -> int:
        return self.weights.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weights.shape[1]


def conv2d_out_hw(h: int, w: int, stride: int, pad: int) -> tuple[int, int]:
    """Output extents of a 3x3 convolution: floor((n + 2*pad - 3)/stride) + 1."""
    ho = (h + 2 * pad - KERNEL_SIZE) // stride + 1
    wo = (w + 2 * pad - KERNEL_SIZE) // stride + 1
    return ho, wo


def _pad_input(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    c, h, w = x.shape
    out = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    out[:, pad : pad + h, pad : pad + w] = x
    return out


def _tap_slice(xp: np.ndarray, ki: int, kj: int, stride: int, ho: int, wo: int):
    """The input window feeding kernel tap (ki, kj), shape [C, ho, wo]."""
    return xp[
        :,
        ki : ki + (ho - 1) * stride + 1 : stride,
        kj : kj + (wo - 1) * stride + 1 : stride,
    ]


# Above this size the column buffer stays unbuilt and the slower (but
# memory-lean) nine-tap GEMM loop runs instead; full-resolution decoder
# layers would otherwise need multi-GB buffers.
_COL_LIMIT_BYTES = 256 * 2**20


def _cols_fit(in_ch: int, ho: int, wo: int, itemsize: int) -> bool:
    return in_ch * KERNEL_SIZE * KERNEL_SIZE * ho * wo * itemsize <= _COL_LIMIT_BYTES


def _build_cols(xp: np.ndarray, in_ch: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """im2col buffer [in_ch*9, ho*wo]; tap (ki, kj) sits at row block ki*3+kj,
    matching the (out_ch, in_ch*9) flattening of the weights."""
    cols = np.empty((in_ch, KERNEL_SIZE * KERNEL_SIZE, ho * wo), dtype=xp.dtype)
    for ki in range(KERNEL_SIZE):
        for kj in range(KERNEL_SIZE):
            sl = _tap_slice(xp, ki, kj, stride, ho, wo)
            cols[:, ki * KERNEL_SIZE + kj, :] = sl.reshape(in_ch, ho * wo)
    return cols.reshape(in_ch * KERNEL_SIZE * KERNEL_SIZE, ho * wo)


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Strided 3x3 convolution with symmetric zero padding.

    Inputs:
    - x: [in_ch, H, W], finite
    - p: ConvParams; p.in_ch must equal x.shape[0]

    Returns [out_ch, H', W'] with H' = floor((H + 2*pad - 3)/stride) + 1,
    likewise W'. out[c, i, j] = bias[c] + sum over in-channels and the 3x3
    window of weight * zero-padded input.
    """
    x = check_chw(x, "conv input")
    if x.shape[0] != p.in_ch:
        raise ShapeError(
            f"conv input has {x.shape[0]} channels on axis 0, "
            f"weights expect {p.in_ch}"
        )
    _, h, w = x.shape
    if h + 2 * p.pad < KERNEL_SIZE or w + 2 * p.pad < KERNEL_SIZE:
        raise ShapeError(
            f"conv input {h}x{w} with pad {p.pad} is smaller than the 3x3 kernel"
        )
    if x.dtype != p.weights.dtype:
        raise ShapeError(
            f"conv input dtype {x.dtype} does not match weights {p.weights.dtype}"
        )
    check_finite(x, "conv input")

    ho, wo = conv2d_out_hw(h, w, p.stride, p.pad)
    xp = _pad_input(x, p.pad)
    if _cols_fit(p.in_ch, ho, wo, x.dtype.itemsize):
        # one GEMM over the column buffer: a single pass over the weights,
        # which dominate memory traffic at small spatial extents
        out2d = p.weights.reshape(p.out_ch, -1) @ _build_cols(
            xp, p.in_ch, p.stride, ho, wo
        )
        out2d += p.bias[:, None]
    else:
        out2d = np.empty((p.out_ch, ho * wo), dtype=x.dtype)
        out2d[:] = p.bias[:, None]
        tmp = np.empty_like(out2d)
        for ki in range(KERNEL_SIZE):
            for kj in range(KERNEL_SIZE):
                sl = _tap_slice(xp, ki, kj, p.stride, ho, wo).reshape(p.in_ch, ho * wo)
                np.matmul(p.weights[:, :, ki, kj], sl, out=tmp)
                out2d += tmp
    return out2d.reshape(p.out_ch, ho, wo)


def conv2d_backward(
    x: np.ndarray, p: ConvParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of conv2d_forward.

    Inputs:
    - x: the forward input [in_ch, H, W]
    - grad_out: upstream gradient, shaped like the forward output

    Returns (grad_input, grad_weights, grad_bias).
    """
    x = check_chw(x, "conv input")
    _, h, w = x.shape
    ho, wo = conv2d_out_hw(h, w, p.stride, p.pad)
    if grad_out.shape != (p.out_ch, ho, wo):
        raise ShapeError(
            f"grad_out: expected shape {(p.out_ch, ho, wo)}, got {grad_out.shape}"
        )

    if grad_out.dtype != p.weights.dtype:
        raise ShapeError(
            f"grad_out dtype {grad_out.dtype} does not match weights {p.weights.dtype}"
        )
    gy2d = grad_out.reshape(p.out_ch, ho * wo)
    grad_bias = grad_out.sum(axis=(1, 2))
    xp = _pad_input(x, p.pad)
    gx_pad = np.zeros(
        (p.in_ch, h + 2 * p.pad, w + 2 * p.pad), dtype=p.weights.dtype
    )
    if _cols_fit(p.in_ch, ho, wo, x.dtype.itemsize):
        cols = _build_cols(xp, p.in_ch, p.stride, ho, wo)
        grad_weights = (gy2d @ cols.T).reshape(p.weights.shape)
        gcols = (p.weights.reshape(p.out_ch, -1).T @ gy2d).reshape(
            p.in_ch, KERNEL_SIZE * KERNEL_SIZE, ho, wo
        )
        for ki in range(KERNEL_SIZE):
            for kj in range(KERNEL_SIZE):
                dst = _tap_slice(gx_pad, ki, kj, p.stride, ho, wo)
                dst += gcols[:, ki * KERNEL_SIZE + kj]
    else:
        grad_weights = np.empty_like(p.weights)
        for ki in range(KERNEL_SIZE):
            for kj in range(KERNEL_SIZE):
                sl = _tap_slice(xp, ki, kj, p.stride, ho, wo)
                grad_weights[:, :, ki, kj] = gy2d @ sl.reshape(p.in_ch, ho * wo).T
                gx_tap = p.weights[:, :, ki, kj].T @ gy2d
                dst = _tap_slice(gx_pad, ki, kj, p.stride, ho, wo)
                dst += gx_tap.reshape(p.in_ch, ho, wo)
    if p.pad == 0:
        grad_input = gx_pad
    else:
        grad_input = gx_pad[:, p.pad : p.pad + h, p.pad : p.pad + w].copy()
    return grad_input, grad_weights, grad_bias


def upsample2x_forward(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling: out[c, i, j] = in[c, i//2, j//2]."""
    x = check_chw(x, "upsample input")
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def upsample2x_backward(grad_out: np.ndarray) -> np.ndarray:
    """Adjoint of upsample2x_forward: each input cell collects its 2x2 block."""
    grad_out = check_chw(grad_out, "upsample grad_out")
    c, h2, w2 = grad_out.shape
    if h2 % 2 or w2 % 2:
        raise ShapeError(
            f"upsample grad_out: spatial extents must be even, got {h2}x{w2}"
        )
    return grad_out.reshape(c, h2 // 2, 2, w2 // 2, 2).sum(axis=(2, 4))


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"leaky ReLU alpha must be in [0, 1), got {alpha}")


def leaky_relu(x: np.ndarray, alpha: float) -> np.ndarray:
    """Elementwise x if x >= 0 else alpha * x."""
    _check_alpha(alpha)
    x = np.asarray(x)
    return np.where(x >= 0, x, x * x.dtype.type(alpha))


def leaky_relu_backward(x: np.ndarray, grad_out: np.ndarray, alpha: float) -> np.ndarray:
    """Upstream gradient scaled by the piecewise slope (slope at 0 is 1)."""
    _check_alpha(alpha)
    x = np.asarray(x)
    if grad_out.shape != x.shape:
        raise ShapeError(
            f"leaky ReLU grad_out shape {grad_out.shape} != input shape {x.shape}"
        )
    one = x.dtype.type(1)
    return grad_out * np.where(x >= 0, one, x.dtype.type(alpha))


def crop_center(x: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Center crop; the odd remainder is dropped from the bottom/right.

    Removes floor((H - target_h)/2) rows from the top and the remainder
    from the bottom, same rule for columns.
    """
    x = check_chw(x, "crop input")
    _, h, w = x.shape
    if target_h > h or target_w > w:
        raise ShapeError(
            f"crop target {target_h}x{target_w} exceeds source {h}x{w}"
        )
    if target_h < 1 or target_w < 1:
        raise ShapeError(f"crop target must be >= 1, got {target_h}x{target_w}")
    top = (h - target_h) // 2
    left = (w - target_w) // 2
    return x[:, top : top + target_h, left : left + target_w].copy()


def crop_center_backward(grad_out: np.ndarray, src_h: int, src_w: int) -> np.ndarray:
    """Adjoint of crop_center: upstream gradient zero-padded back to the source."""
    grad_out = check_chw(grad_out, "crop grad_out")
    c, th, tw = grad_out.shape
    if th > src_h or tw > src_w:
        raise ShapeError(
            f"crop grad_out {th}x{tw} exceeds source {src_h}x{src_w}"
        )
    top = (src_h - th) // 2
    left = (src_w - tw) // 2
    out = np.zeros((c, src_h, src_w), dtype=grad_out.dtype)
    out[:, top : top + th, left : left + tw] = grad_out
    return out


def concat_channels(tensors: list[np.ndarray]) -> np.ndarray:
    """Stack [Ci,H,W] tensors along the channel axis, in argument order."""
    if not tensors:
        raise ValueError("concat_channels: empty tensor list")
    tensors = [check_chw(t, f"concat input {i}") for i, t in enumerate(tensors)]
    h, w = tensors[0].shape[1:]
    for i, t in enumerate(tensors[1:], start=1):
        if t.shape[1:] != (h, w):
            raise ShapeError(
                f"concat input {i} has spatial size {t.shape[1]}x{t.shape[2]}, "
                f"expected {h}x{w}"
            )
    if len(tensors) == 1:
        return tensors[0]
    return np.concatenate(tensors, axis=0)
