"""From-scratch binary posterior network.

A small fully connected net (rectifier hidden layers, logistic output,
binary cross-entropy) trained by mini-batch SGD with momentum and L2 weight
decay. Everything runs on numpy with a single seeded generator, so a fixed
seed reproduces the weights bit for bit. The snapshot returned by
:func:`fit` is the epoch with the best validation accuracy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROVENANCE_TAGS = ("mixture", "component")


@dataclass(frozen=True)
class TrainConfig:
    hidden_layers: int = 2
    hidden_units: int = 50
    epochs: int = 150
    batch_size: int = 50
    learning_rate: float = 0.01
    momentum: float = 0.0
    weight_decay: float = 1e-5
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.hidden_layers, self.hidden_units, self.epochs, self.batch_size) < 1:
            raise ValueError("layer, unit, epoch and batch counts must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 < self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in (0, 0.5]")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class Sample:
    """Finite point set in d-dimensional space with stable row identifiers.

    ``provenance`` records which side of the estimation problem the rows
    came from ("mixture" or "component"); it is bookkeeping only and never
    affects computation.
    """

    points: np.ndarray
    provenance: str
    ids: np.ndarray = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be a 2-d array (rows are observations)")
        if not np.isfinite(points).all():
            raise ValueError("points must be finite")
        if self.provenance not in PROVENANCE_TAGS:
            raise ValueError(f"provenance must be one of {PROVENANCE_TAGS}")
        ids = self.ids
        if ids is None:
            ids = np.arange(len(points), dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (len(points),) or len(np.unique(ids)) != len(ids):
            raise ValueError("ids must be unique and aligned with points")
        points = points.copy()
        points.setflags(write=False)
        ids = ids.copy()
        ids.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


class PosteriorModel:
    """Trained network: predicts the probability that a point came from the
    sample labeled positive during :func:`fit`."""

    def __init__(self, weights, biases, train_history, best_epoch):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.train_history = train_history
        self.best_epoch = best_epoch

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def predict(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.input_dim:
            raise ValueError(
                f"dimension mismatch: model expects {self.input_dim} features, "
                f"got shape {points.shape}"
            )
        _, probs = _forward((self.weights, self.biases), points)
        return probs

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {"weights": w.tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
            "best_epoch": self.best_epoch,
            "train_history": self.train_history,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PosteriorModel":
        weights = [np.asarray(layer["weights"], dtype=float) for layer in obj["layers"]]
        biases = [np.asarray(layer["bias"], dtype=float) for layer in obj["layers"]]
        return cls(weights, biases, obj.get("train_history", {}), obj.get("best_epoch", 0))

    @classmethod
    def from_json(cls, text: str) -> "PosteriorModel":
        return cls.from_json_dict(json.loads(text))


class FlippedPosterior:
    """View of a model with the class roles swapped: predicts 1 - p."""

    def __init__(self, model):
        self.model = model

    @property
    def input_dim(self):
        return self.model.input_dim

    def predict(self, points) -> np.ndarray:
        return 1.0 - self.model.predict(points)


def _init_params(rng, layer_dims):
    """Fan-in scaled uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(params, x):
    weights, biases = params
    activations = [x]
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    z = h @ weights[-1] + biases[-1]
    probs = 1.0 / (1.0 + np.exp(-z[:, 0]))
    return activations, probs


def _loss(params, x, y, weight_decay):
    _, p = _forward(params, x)
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    bce = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    l2 = 0.5 * weight_decay * sum(float((w ** 2).sum()) for w in params[0])
    return bce + l2


def _loss_and_grads(params, x, y, weight_decay):
    weights, biases = params
    activations, p = _forward(params, x)
    n = len(y)
    p_safe = np.clip(p, 1e-12, 1.0 - 1e-12)
    bce = -np.mean(y * np.log(p_safe) + (1.0 - y) * np.log(1.0 - p_safe))
    loss = bce + 0.5 * weight_decay * sum(float((w ** 2).sum()) for w in weights)

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = ((p - y) / n)[:, None]
    grad_w[-1] = activations[-1].T @ delta + weight_decay * weights[-1]
    grad_b[-1] = delta.sum(axis=0)
    for layer in range(len(weights) - 2, -1, -1):
        delta = (delta @ weights[layer + 1].T) * (activations[layer + 1] > 0)
        grad_w[layer] = activations[layer].T @ delta + weight_decay * weights[layer]
        grad_b[layer] = delta.sum(axis=0)
    return loss, grad_w, grad_b


def _accuracy(params, x, y):
    _, p = _forward(params, x)
    return float(np.mean((p > 0.5) == (y > 0.5)))


def _stratified_split(rng, n, val_fraction):
    """Validation indices: the tail of a seeded shuffle."""
    perm = rng.permutation(n)
    n_val = int(n * val_fraction)
    return perm[: n - n_val], perm[n - n_val:]


def fit(x_f: Sample, x_h: Sample, cfg: TrainConfig = TrainConfig()) -> PosteriorModel:
    """Train the posterior network on the two samples.

    Rows of ``x_f`` are labeled 1 and rows of ``x_h`` 0, so the returned
    model predicts the probability that a point belongs to the first
    sample. The validation split is stratified: the tail of an independent
    seeded shuffle of each side. The returned weights are the snapshot of
    the epoch with the highest validation accuracy (earliest epoch wins
    ties).
    """
    if x_f.dim != x_h.dim:
        raise ValueError(f"dimension mismatch: {x_f.dim} vs {x_h.dim}")
    rng = np.random.default_rng(cfg.seed)

    f_train_idx, f_val_idx = _stratified_split(rng, len(x_f), cfg.validation_fraction)
    h_train_idx, h_val_idx = _stratified_split(rng, len(x_h), cfg.validation_fraction)
    if min(len(f_train_idx), len(h_train_idx)) < 2 or min(len(f_val_idx), len(h_val_idx)) < 1:
        raise ValueError("fewer than 2 training rows per side after validation split")

    x_train = np.vstack([x_f.points[f_train_idx], x_h.points[h_train_idx]])
    y_train = np.r_[np.ones(len(f_train_idx)), np.zeros(len(h_train_idx))]
    x_val = np.vstack([x_f.points[f_val_idx], x_h.points[h_val_idx]])
    y_val = np.r_[np.ones(len(f_val_idx)), np.zeros(len(h_val_idx))]

    dims = [x_f.dim] + [cfg.hidden_units] * cfg.hidden_layers + [1]
    weights, biases = _init_params(rng, dims)
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    history = {"train_accuracy": [], "val_accuracy": []}
    best = (-1.0, None, None, -1)
    n_train = len(y_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grad_w, grad_b = _loss_and_grads(
                (weights, biases), x_train[batch], y_train[batch], cfg.weight_decay
            )
            for i in range(len(weights)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * grad_w[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * grad_b[i]
                weights[i] = weights[i] + vel_w[i]
                biases[i] = biases[i] + vel_b[i]
        train_acc = _accuracy((weights, biases), x_train, y_train)
        val_acc = _accuracy((weights, biases), x_val, y_val)
        history["train_accuracy"].append(train_acc)
        history["val_accuracy"].append(val_acc)
        if val_acc > best[0]:
            best = (val_acc, [w.copy() for w in weights], [b.copy() for b in biases], epoch)

    return PosteriorModel(best[1], best[2], history, best[3])


def predict_posterior(model, points) -> np.ndarray:
    """Posterior probabilities for a batch of points (duck-typed model)."""
    return model.predict(points)


def gradient_check(cfg: TrainConfig, probe_points, probe_labels,
                   step: float = 1e-5) -> float:
    """Largest relative disagreement between backpropagated gradients and
    central finite differences on a small probe batch.

    Builds a fresh network from ``cfg.seed`` sized to the probe and compares
    every parameter's analytic gradient against
    (loss(theta+step) - loss(theta-step)) / (2*step).
    """
    probe_points = np.asarray(probe_points, dtype=float)
    probe_labels = np.asarray(probe_labels, dtype=float)
    if len(probe_points) > 8:
        raise ValueError("probe batch must have at most 8 rows")
    rng = np.random.default_rng(cfg.seed)
    dims = [probe_points.shape[1]] + [cfg.hidden_units] * cfg.hidden_layers + [1]
    weights, biases = _init_params(rng, dims)
    params = (weights, biases)
    _, grad_w, grad_b = _loss_and_grads(params, probe_points, probe_labels, cfg.weight_decay)

    worst = 0.0
    for arrays, grads in ((weights, grad_w), (biases, grad_b)):
        for arr, grad in zip(arrays, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up = _loss(params, probe_points, probe_labels, cfg.weight_decay)
                flat[j] = orig - step
                down = _loss(params, probe_points, probe_labels, cfg.weight_decay)
                flat[j] = orig
                fd = (up - down) / (2.0 * step)
                rel = abs(gflat[j] - fd) / max(1e-8, abs(gflat[j]) + abs(fd))
                worst = max(worst, rel)
    return worst
