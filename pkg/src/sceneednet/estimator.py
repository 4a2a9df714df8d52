"""scikit-learn style front end: fit on (inputs, flow fields), predict fields."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dataset import Sample
from .geometry import SceneFlowField
from .network import build_network, default_network_spec
from .training import TrainConfig, evaluate, fit
from .validation import check_chw


def _as_field(y, shape) -> SceneFlowField:
    if isinstance(y, SceneFlowField):
        return y
    flow = np.asarray(y, dtype=np.float32)
    if flow.shape != (3, *shape):
        raise ValueError(f"target shape {flow.shape} != expected {(3, *shape)}")
    return SceneFlowField(flow=flow, valid=np.ones(shape, dtype=bool))


class SceneFlowRegressor(BaseEstimator):
    """Per-pixel 3D motion regressor over stacked stereo pairs.

    X is a sequence of [12,H,W] float32 tensors (the four normalized RGB
    views, channel-concatenated); y a sequence of SceneFlowField targets or
    plain [3,H,W] arrays (taken as fully valid). Resolutions may vary between
    samples — the network is fully convolutional.
    """

    def __init__(
        self,
        alpha: float = 0.1,
        lr0: float = 1e-5,
        momentum: float = 0.5,
        epochs: int = 100,
        decay: float | None = None,
        batch_size: int = 1,
        seed: int = 0,
    ):
        self.alpha = alpha
        self.lr0 = lr0
        self.momentum = momentum
        self.epochs = epochs
        self.decay = decay
        self.batch_size = batch_size
        self.seed = seed

    def _make_samples(self, X, y) -> list[Sample]:
        if len(X) != len(y):
            raise ValueError(f"len(X)={len(X)} != len(y)={len(y)}")
        samples = []
        for xi, yi in zip(X, y):
            xi = check_chw(np.asarray(xi, dtype=np.float32), "X[i]", channels=12)
            samples.append(Sample(input=xi, target=_as_field(yi, xi.shape[1:])))
        return samples

    def fit(self, X, y):
        samples = self._make_samples(X, y)
        cfg = TrainConfig(
            lr0=self.lr0,
            momentum=self.momentum,
            epochs=self.epochs,
            decay=self.decay,
            seed=self.seed,
            batch_size=self.batch_size,
        )
        net = build_network(default_network_spec(self.alpha), seed=self.seed)
        self.net_, self.history_ = fit(net, samples, cfg)
        return self

    def predict(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "net_")
        preds = []
        for xi in X:
            xi = check_chw(np.asarray(xi, dtype=np.float32), "X[i]", channels=12)
            out, _ = self.net_.forward(xi, want_cache=False)
            preds.append(out)
        return preds

    def score(self, X, y) -> float:
        """Negative mean 3D end-point error (higher is better)."""
        check_is_fitted(self, "net_")
        return -evaluate(self.net_, self._make_samples(X, y))
