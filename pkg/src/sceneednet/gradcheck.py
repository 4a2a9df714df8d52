"""Finite-difference verification of hand-written backward passes."""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["gradcheck"]


def gradcheck(
    forward: Callable[[np.ndarray], np.ndarray],
    backward: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    eps: float = 1e-5,
    cotangent: np.ndarray | None = None,
) -> float:
    """Compare an analytic input gradient against central differences.

    `forward(x)` maps the probe array to an output; `backward(x, grad_out)`
    returns the analytic gradient of sum(forward(x) * cotangent) with respect
    to x when grad_out == cotangent. The probe loss is that weighted sum, with
    the cotangent defaulting to all ones.

    Returns the max over input elements of
        |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    Requires float64 probes and eps > 0.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    x = np.asarray(x)
    if x.dtype != np.float64:
        raise ValueError(f"gradcheck requires float64 input, got {x.dtype}")
    if x.size == 0:
        return 0.0

    y = forward(x)
    g = np.ones_like(y) if cotangent is None else cotangent.astype(np.float64)
    analytic = np.asarray(backward(x, g), dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(
            f"backward returned shape {analytic.shape}, expected {x.shape}"
        )

    def probe(z: np.ndarray) -> float:
        return float(np.sum(forward(z) * g))

    numeric = np.empty_like(analytic)
    flat = x.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = probe(x)
        flat[i] = orig - eps
        lo = probe(x)
        flat[i] = orig
        num_flat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
