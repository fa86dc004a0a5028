"""Asymmetric focal loss (and its BCE special case) with exact gradients,
plus the unlabeled-loss variant that skips ignored entries (-1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import asym_loss_elementwise


class LossShapeError(ValueError):
    pass


class PseudoValueError(ValueError):
    """Pseudo-label matrix contains something outside {1, 0, -1}."""


@dataclass(frozen=True)
class LossConfig:
    kind: str = "asl"  # "asl" | "bce"
    lambda_pos: float = 1.0
    lambda_neg: float = 4.0
    probability_clamp: float = 1e-7

    def __post_init__(self):
        if self.kind not in ("asl", "bce"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.lambda_pos < 0 or self.lambda_neg < 0:
            raise ValueError("focusing parameters must be >= 0")
        if not 0.0 < self.probability_clamp < 0.5:
            raise ValueError("probability_clamp must be in (0, 0.5)")

    @property
    def effective_lambdas(self) -> tuple[float, float]:
        if self.kind == "bce":
            return 0.0, 0.0
        return self.lambda_pos, self.lambda_neg

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda_pos": self.lambda_pos,
            "lambda_neg": self.lambda_neg,
            "probability_clamp": self.probability_clamp,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LossConfig":
        return cls(**obj)


def positive_term(f, lam_pos: float, clamp: float = 1e-7):
    """-(1 - f)^lam_pos * log(f); lam_pos = 0 reduces to -log f."""
    f = np.clip(np.asarray(f, dtype=np.float64), clamp, 1.0 - clamp)
    return -((1.0 - f) ** lam_pos) * np.log(f)


def negative_term(f, lam_neg: float, clamp: float = 1e-7):
    """-f^lam_neg * log(1 - f); lam_neg = 0 reduces to -log(1 - f)."""
    f = np.clip(np.asarray(f, dtype=np.float64), clamp, 1.0 - clamp)
    return -(f**lam_neg) * np.log1p(-f)


def elementwise(probs: np.ndarray, targets: np.ndarray, config: LossConfig):
    """Per-entry loss and gradient matrices; entries with target -1 are zero."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise LossShapeError(f"shape mismatch {probs.shape} vs {targets.shape}")
    lam_pos, lam_neg = config.effective_lambdas
    return asym_loss_elementwise(
        probs, targets, lam_pos, lam_neg, config.probability_clamp
    )


def supervised_loss(
    probs: np.ndarray, labels: np.ndarray, config: LossConfig
) -> tuple[float, np.ndarray]:
    """Mean per-entry loss over the batch and its gradient w.r.t. probs."""
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise PseudoValueError("supervised labels must be 0/1")
    loss, grad = elementwise(probs, labels, config)
    count = labels.size
    return float(loss.sum() / count), grad / count


def unlabeled_loss(
    probs: np.ndarray, pseudo: np.ndarray, config: LossConfig
) -> tuple[float, np.ndarray]:
    """Like supervised_loss but pseudo entries of -1 contribute exactly zero;
    normalization is by the count of non-ignored entries."""
    pseudo = np.asarray(pseudo)
    if not np.isin(pseudo, (1, 0, -1)).all():
        raise PseudoValueError("pseudo-labels must be in {1, 0, -1}")
    loss, grad = elementwise(probs, pseudo, config)
    count = int((pseudo != -1).sum())
    if count == 0:
        return 0.0, np.zeros_like(grad)
    return float(loss.sum() / count), grad / count
