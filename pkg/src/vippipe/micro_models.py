"""Built-in micro-models with closed-form per-sample gradients.

Both models keep per-sample losses additive, so the batch gradient is the
mean of per-sample gradients — the property the pseudo-batch accumulator
relies on. Parameters live in an ordered dict of float64 arrays so they can
be checkpointed as a flat payload.
"""

from __future__ import annotations

import zlib
from typing import Any

import numpy as np

from .errors import ShapeMismatch, UnknownModel

LINEAR_REGRESSOR = "linear_regressor"
LOGISTIC_CLIP_CLASSIFIER = "logistic_clip_classifier"


def _name_tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class LinearRegressor:
    """Scalar linear model y = w.x + b with squared loss 0.5 (y_hat - y)^2."""

    name = LINEAR_REGRESSOR

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.params: dict[str, np.ndarray] = {
            "weight": np.zeros(n_features, dtype=np.float64),
            "bias": np.zeros(1, dtype=np.float64),
        }

    def init_params(self, seed: int) -> None:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), _name_tag(self.name)]))
        self.params["weight"] = rng.normal(0.0, 0.01, self.n_features)
        self.params["bias"] = np.zeros(1, dtype=np.float64)

    def _features(self, x: Any) -> np.ndarray:
        f = np.asarray(x, dtype=np.float64).ravel()
        if f.shape[0] != self.n_features:
            raise ShapeMismatch(f"expected {self.n_features} features, got {f.shape[0]}")
        return f

    def forward(self, x: Any) -> float:
        f = self._features(x)
        return float(self.params["weight"] @ f + self.params["bias"][0])

    def predict(self, x: Any) -> float:
        return self.forward(x)

    def loss(self, x: Any, y: float) -> float:
        r = self.forward(x) - float(y)
        return 0.5 * r * r

    def per_sample_loss_grad(self, x: Any, y: float) -> tuple[float, dict[str, np.ndarray]]:
        f = self._features(x)
        r = float(self.params["weight"] @ f + self.params["bias"][0]) - float(y)
        return 0.5 * r * r, {"weight": r * f, "bias": np.array([r])}


class LogisticClipClassifier:
    """Softmax classifier over clip features with cross-entropy loss.

    Inputs may be 1-D feature vectors, or raw 4-D clip arrays of any
    (length, height, width) — those reduce to per-channel means in [0, 1],
    which is how pseudo-batches mix variable-sized inputs.
    """

    name = LOGISTIC_CLIP_CLASSIFIER

    def __init__(self, n_classes: int, n_features: int):
        self.n_classes = n_classes
        self.n_features = n_features
        self.params: dict[str, np.ndarray] = {
            "weight": np.zeros((n_classes, n_features), dtype=np.float64),
            "bias": np.zeros(n_classes, dtype=np.float64),
        }

    def init_params(self, seed: int) -> None:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), _name_tag(self.name)]))
        self.params["weight"] = rng.normal(0.0, 0.01, (self.n_classes, self.n_features))
        self.params["bias"] = np.zeros(self.n_classes, dtype=np.float64)

    def _features(self, x: Any) -> np.ndarray:
        arr = np.asarray(x)
        if arr.ndim == 4:  # raw clip: per-channel mean, scaled to [0, 1]
            f = arr.astype(np.float64).mean(axis=(0, 1, 2)) / 255.0
        else:
            f = arr.astype(np.float64).ravel()
        if f.shape[0] != self.n_features:
            raise ShapeMismatch(f"expected {self.n_features} features, got {f.shape[0]}")
        return f

    def forward(self, x: Any) -> np.ndarray:
        f = self._features(x)
        return self.params["weight"] @ f + self.params["bias"]

    def predict(self, x: Any) -> int:
        return int(np.argmax(self.forward(x)))

    def _softmax(self, logits: np.ndarray) -> np.ndarray:
        z = logits - logits.max()
        e = np.exp(z)
        return e / e.sum()

    def loss(self, x: Any, y: int) -> float:
        p = self._softmax(self.forward(x))
        return float(-np.log(max(p[int(y)], 1e-300)))

    def per_sample_loss_grad(self, x: Any, y: int) -> tuple[float, dict[str, np.ndarray]]:
        f = self._features(x)
        p = self._softmax(self.params["weight"] @ f + self.params["bias"])
        y = int(y)
        loss = float(-np.log(max(p[y], 1e-300)))
        g = p.copy()
        g[y] -= 1.0
        return loss, {"weight": np.outer(g, f), "bias": g}


MicroModel = LinearRegressor | LogisticClipClassifier

MODEL_NAMES = (LINEAR_REGRESSOR, LOGISTIC_CLIP_CLASSIFIER)


def build_model(name: str, *, n_features: int, n_classes: int = 1) -> MicroModel:
    if name == LINEAR_REGRESSOR:
        return LinearRegressor(n_features)
    if name == LOGISTIC_CLIP_CLASSIFIER:
        return LogisticClipClassifier(n_classes, n_features)
    raise UnknownModel(f"unknown model {name!r}; choose from {list(MODEL_NAMES)}")
