"""Sigmoid-output classifiers with hand-derived gradients, plain SGD / Adam,
and an EMA shadow copy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


class NumericError(ValueError):
    pass


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ClassifierModel:
    """Linear or one-hidden-layer (ReLU) classifier, one sigmoid per class."""

    architecture: str  # "linear" | "one_hidden"
    params: dict[str, np.ndarray]
    hidden_units: int = 0

    @classmethod
    def init(
        cls,
        architecture: str,
        feature_dim: int,
        num_classes: int,
        seed: int,
        hidden_units: int = 32,
    ) -> "ClassifierModel":
        rng = np.random.default_rng(seed)

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        if architecture == "linear":
            params = {
                "W": uniform(feature_dim, (feature_dim, num_classes)),
                "b": np.zeros(num_classes),
            }
            return cls("linear", params)
        if architecture == "one_hidden":
            params = {
                "W1": uniform(feature_dim, (feature_dim, hidden_units)),
                "b1": np.zeros(hidden_units),
                "W2": uniform(hidden_units, (hidden_units, num_classes)),
                "b2": np.zeros(num_classes),
            }
            return cls("one_hidden", params, hidden_units=hidden_units)
        raise ShapeError(f"unknown architecture {architecture!r}")

    @property
    def num_classes(self) -> int:
        key = "W" if self.architecture == "linear" else "W2"
        return self.params[key].shape[1]

    @property
    def feature_dim(self) -> int:
        key = "W" if self.architecture == "linear" else "W1"
        return self.params[key].shape[0]

    def copy(self) -> "ClassifierModel":
        return ClassifierModel(
            self.architecture,
            {k: v.copy() for k, v in self.params.items()},
            self.hidden_units,
        )

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "hidden_units": self.hidden_units,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ClassifierModel":
        return cls(
            obj["architecture"],
            {k: np.asarray(v, dtype=np.float64) for k, v in obj["params"].items()},
            int(obj.get("hidden_units", 0)),
        )


def forward(model: ClassifierModel, features: np.ndarray) -> np.ndarray:
    """Predicted per-class probabilities, shape (B, q), entries in (0, 1)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ShapeError(
            f"expected features (B, {model.feature_dim}), got {features.shape}"
        )
    p = model.params
    if model.architecture == "linear":
        return _sigmoid(features @ p["W"] + p["b"])
    h = np.maximum(features @ p["W1"] + p["b1"], 0.0)
    return _sigmoid(h @ p["W2"] + p["b2"])


def backward(
    model: ClassifierModel, features: np.ndarray, grad_probs: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact chain-rule parameter gradients given dLoss/dProbabilities."""
    features = np.asarray(features, dtype=np.float64)
    grad_probs = np.asarray(grad_probs, dtype=np.float64)
    p = model.params
    if model.architecture == "linear":
        f = _sigmoid(features @ p["W"] + p["b"])
        if grad_probs.shape != f.shape:
            raise ShapeError(f"grad shape {grad_probs.shape} != {f.shape}")
        dz = grad_probs * f * (1.0 - f)
        return {"W": features.T @ dz, "b": dz.sum(axis=0)}
    z1 = features @ p["W1"] + p["b1"]
    h = np.maximum(z1, 0.0)
    f = _sigmoid(h @ p["W2"] + p["b2"])
    if grad_probs.shape != f.shape:
        raise ShapeError(f"grad shape {grad_probs.shape} != {f.shape}")
    dz2 = grad_probs * f * (1.0 - f)
    dh = dz2 @ p["W2"].T
    dz1 = dh * (z1 > 0.0)
    return {
        "W1": features.T @ dz1,
        "b1": dz1.sum(axis=0),
        "W2": h.T @ dz2,
        "b2": dz2.sum(axis=0),
    }


@dataclass
class OptimizerState:
    learning_rate: float
    kind: str = "sgd"  # "sgd" | "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "kind": self.kind,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
            "m": {k: v.tolist() for k, v in self.m.items()},
            "v": {k: v.tolist() for k, v in self.v.items()},
        }


def optimizer_step(
    state: OptimizerState, model: ClassifierModel, grads: dict[str, np.ndarray]
) -> ClassifierModel:
    for name, g in grads.items():
        if name not in model.params:
            raise ShapeError(f"unknown parameter {name!r}")
        if g.shape != model.params[name].shape:
            raise ShapeError(f"gradient shape mismatch for {name!r}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in tensor {name!r}")
    state.step += 1
    if state.kind == "sgd":
        for name, g in grads.items():
            model.params[name] -= state.learning_rate * g
    elif state.kind == "adam":
        for name, g in grads.items():
            if name not in state.m:
                state.m[name] = np.zeros_like(g)
                state.v[name] = np.zeros_like(g)
            state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
            state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
            m_hat = state.m[name] / (1 - state.beta1**state.step)
            v_hat = state.v[name] / (1 - state.beta2**state.step)
            model.params[name] -= (
                state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
            )
    else:
        raise ShapeError(f"unknown optimizer kind {state.kind!r}")
    return model


@dataclass
class EmaShadow:
    """Exponentially averaged parameter copy; default decay follows common
    practice for stable prediction (0.9997)."""

    params: dict[str, np.ndarray]
    decay: float = 0.9997

    @classmethod
    def from_model(cls, model: ClassifierModel, decay: float = 0.9997) -> "EmaShadow":
        return cls({k: v.copy() for k, v in model.params.items()}, decay)

    def as_model(self, model: ClassifierModel) -> ClassifierModel:
        return ClassifierModel(
            model.architecture,
            {k: v.copy() for k, v in self.params.items()},
            model.hidden_units,
        )

    def to_dict(self) -> dict:
        return {"decay": self.decay, "params": {k: v.tolist() for k, v in self.params.items()}}


def ema_update(shadow: EmaShadow, model: ClassifierModel) -> EmaShadow:
    for name, value in model.params.items():
        if shadow.params[name].shape != value.shape:
            raise ShapeError(f"EMA shape mismatch for {name!r}")
        shadow.params[name] = (
            shadow.decay * shadow.params[name] + (1.0 - shadow.decay) * value
        )
    return shadow


def save_checkpoint(
    path,
    model: ClassifierModel,
    ema: EmaShadow | None = None,
    optimizer: OptimizerState | None = None,
) -> None:
    obj = {"model": model.to_dict()}
    if ema is not None:
        obj["ema"] = ema.to_dict()
    if optimizer is not None:
        obj["optimizer"] = optimizer.to_dict()
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_checkpoint(path) -> tuple[ClassifierModel, EmaShadow | None]:
    with open(path) as fh:
        obj = json.load(fh)
    model = ClassifierModel.from_dict(obj["model"])
    ema = None
    if "ema" in obj:
        ema = EmaShadow(
            {k: np.asarray(v) for k, v in obj["ema"]["params"].items()},
            float(obj["ema"]["decay"]),
        )
    return model, ema
