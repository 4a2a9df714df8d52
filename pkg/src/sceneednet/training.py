"""Masked 3D end-point-error loss, SGD with momentum and epoch decay, the
epoch loop, and evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import SceneFlowField
from .network import Network, save_checkpoint
from .validation import DataError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults follow the reference protocol (lr 1e-5,
    momentum 0.5, 100 epochs, decay lr0/epochs)."""

    lr0: float = 1e-5
    momentum: float = 0.5
    epochs: int = 100
    decay: float | None = None  # None -> lr0/epochs
    seed: int = 0
    batch_size: int = 1
    checkpoint_every: int = 0  # 0 = no periodic checkpoints

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.decay is not None and self.decay < 0:
            raise ValueError(f"decay must be non-negative, got {self.decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be non-negative")

    @property
    def effective_decay(self) -> float:
        if self.decay is not None:
            return self.decay
        return self.lr0 / self.epochs if self.epochs > 0 else 0.0


def epe_loss(pred: np.ndarray, target: SceneFlowField, eps: float = 1e-8):
    """Mean end-point error over valid pixels, smoothed by eps for
    differentiability at exact matches; returns (loss, grad_wrt_pred)."""
    if pred.shape != target.flow.shape:
        raise ShapeError(f"pred shape {pred.shape} != target {target.flow.shape}")
    valid = target.valid
    n = int(valid.sum())
    if n == 0:
        raise ValueError("no valid pixels in target")
    diff = pred.astype(np.float64) - target.flow.astype(np.float64)
    dist = np.sqrt((diff * diff).sum(axis=0) + eps * eps)
    loss = float(dist[valid].sum() / n)
    grad = diff / (dist[None, :, :] * n)
    grad[:, ~valid] = 0.0
    return loss, grad.astype(pred.dtype, copy=False)


def masked_epe(pred: np.ndarray, target: SceneFlowField) -> float:
    """Evaluation metric: plain (unsmoothed) mean 3D EPE over valid pixels."""
    if pred.shape != target.flow.shape:
        raise ShapeError(f"pred shape {pred.shape} != target {target.flow.shape}")
    valid = target.valid
    n = int(valid.sum())
    if n == 0:
        raise ValueError("no valid pixels in target")
    diff = pred.astype(np.float64) - target.flow.astype(np.float64)
    dist = np.sqrt((diff * diff).sum(axis=0))
    return float(dist[valid].sum() / n)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """lr0 / (1 + decay*epoch): strictly non-increasing, positive."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return cfg.lr0 / (1.0 + cfg.effective_decay * epoch)


class OptimizerState:
    """Per-parameter momentum buffers, aligned with the network's layers."""

    def __init__(self, velocities: list):
        self.velocities = velocities

    @classmethod
    def zeros_like(cls, net: Network) -> "OptimizerState":
        velocities = [None] * len(net.spec.layers)
        for i, p in net.iter_params():
            velocities[i] = (np.zeros_like(p.weights), np.zeros_like(p.bias))
        return cls(velocities)


def sgd_step(net: Network, grads: list, state: OptimizerState, lr: float, momentum: float):
    """v <- momentum*v - lr*g; w <- w + v (in place, per parameter)."""
    for i, p in net.iter_params():
        if grads[i] is None:
            raise ValueError(f"missing gradient for layer {i}")
        gw, gb = grads[i]
        if gw.shape != p.weights.shape or gb.shape != p.bias.shape:
            raise ShapeError(f"gradient shapes do not match parameters at layer {i}")
        vw, vb = state.velocities[i]
        vw *= momentum
        vw -= lr * gw
        p.weights[...] += vw
        vb *= momentum
        vb -= lr * gb
        p.bias[...] += vb


def _zero_grads_like(net: Network) -> list:
    acc = [None] * len(net.spec.layers)
    for i, p in net.iter_params():
        acc[i] = (np.zeros_like(p.weights), np.zeros_like(p.bias))
    return acc


def fit(
    net: Network,
    dataset,
    cfg: TrainConfig,
    val_dataset=None,
    checkpoint_dir=None,
):
    """Epoch loop: seeded shuffle, per-sample forward/loss/backward, SGD step
    with the decayed learning rate (gradients averaged within a batch).
    Returns (net, history); history holds one dict per epoch."""
    if len(dataset) == 0:
        raise DataError("empty training dataset")
    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState.zeros_like(net)
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = _zero_grads_like(net)
            for idx in batch:
                try:
                    sample = dataset[int(idx)]
                except Exception as e:
                    raise DataError(
                        f"epoch {epoch}: failed to load sample {idx}: {e}"
                    ) from e
                out, cache = net.forward(sample.input)
                loss, gout = epe_loss(out, sample.target)
                grads = net.backward(cache, gout)
                epoch_losses.append(loss)
                for i, _ in net.iter_params():
                    acc[i][0][:] += grads[i][0]
                    acc[i][1][:] += grads[i][1]
            if len(batch) > 1:
                inv = np.float32(1.0 / len(batch))
                for i, _ in net.iter_params():
                    acc[i][0][:] *= inv
                    acc[i][1][:] *= inv
            sgd_step(net, acc, state, lr, cfg.momentum)
        entry = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(epoch_losses)),
        }
        line = f"epoch={epoch} lr={lr:.8g} train_loss={entry['train_loss']:.6f}"
        if val_dataset is not None:
            entry["val_loss"] = evaluate(net, val_dataset)
            line += f" val_loss={entry['val_loss']:.6f}"
        logger.info("%s", line)
        history.append(entry)
        if (
            checkpoint_dir is not None
            and cfg.checkpoint_every > 0
            and (epoch + 1) % cfg.checkpoint_every == 0
        ):
            path = Path(checkpoint_dir) / f"checkpoint_epoch_{epoch + 1:04d}.sedn"
            save_checkpoint(path, net, epoch=epoch + 1, velocities=state.velocities)
    return net, history


def evaluate(net: Network, dataset) -> float:
    """Mean over samples of the masked mean 3D EPE (no smoothing)."""
    if len(dataset) == 0:
        raise DataError("empty evaluation dataset")
    total = 0.0
    for i in range(len(dataset)):
        sample = dataset[i]
        out, _ = net.forward(sample.input, want_cache=False)
        total += masked_epe(out, sample.target)
    return total / len(dataset)
