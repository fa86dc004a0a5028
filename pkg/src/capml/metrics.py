"""Evaluation metrics: mAP, class-averaged and pooled F1 over committed
pseudo-labels, and the worst-class pseudo-labeling error.

Convention note: entries labeled -1 are excluded from the F1 confusion counts
(those metrics grade committed labels) but count as "assigned negative" in the
pseudo-labeling error, which compares only against the positive-assignment set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


def average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    """Precision averaged at each positive rank; ties broken by index."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    hits = np.asarray(truth)[order] == 1
    if not hits.any():
        raise MetricError("no positive instances for this class")
    ranks = np.arange(1, len(hits) + 1)
    cum_hits = np.cumsum(hits)
    return float((cum_hits[hits] / ranks[hits]).mean())


def mean_average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    scores = np.asarray(scores)
    truth = np.asarray(truth)
    if scores.shape != truth.shape:
        raise MetricError(f"shape mismatch {scores.shape} vs {truth.shape}")
    aps = []
    for k in range(scores.shape[1]):
        if truth[:, k].sum() == 0:
            logger.info("class %d has no positives; skipped from mAP", k)
            continue
        aps.append(average_precision(scores[:, k], truth[:, k]))
    if not aps:
        raise MetricError("no class has a positive instance")
    return float(np.mean(aps))


def _confusion(pseudo: np.ndarray, truth: np.ndarray):
    committed = pseudo != -1
    pred_pos = (pseudo == 1) & committed
    tp = (pred_pos & (truth == 1)).sum(axis=0).astype(np.float64)
    fp = (pred_pos & (truth == 0)).sum(axis=0).astype(np.float64)
    fn = ((pseudo == 0) & committed & (truth == 1)).sum(axis=0).astype(np.float64)
    return tp, fp, fn


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros_like(tp + 0.0), where=denom > 0)


def cf1_of1(pseudo: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Class-averaged F1 and pooled-count F1; -1 entries are excluded and a
    zero-denominator F1 is 0."""
    pseudo = np.asarray(pseudo)
    truth = np.asarray(truth)
    if pseudo.shape != truth.shape:
        raise MetricError(f"shape mismatch {pseudo.shape} vs {truth.shape}")
    tp, fp, fn = _confusion(pseudo, truth)
    cf1 = float(_f1(tp, fp, fn).mean())
    of1 = float(_f1(tp.sum(), fp.sum(), fn.sum()))
    return cf1, of1


@dataclass
class PseudoLabelReport:
    precision: np.ndarray  # per class, -1 excluded
    recall: np.ndarray
    cf1: float
    of1: float
    epsilon: float  # worst class: epsilon_pos + epsilon_neg
    epsilon_pos: float  # missed-positive rate at the worst class
    epsilon_neg: float  # spurious-positive rate at the worst class
    epsilon_pos_per_class: np.ndarray
    epsilon_neg_per_class: np.ndarray

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "cf1": self.cf1,
            "of1": self.of1,
            "epsilon": self.epsilon,
            "epsilon_pos": self.epsilon_pos,
            "epsilon_neg": self.epsilon_neg,
            "epsilon_pos_per_class": self.epsilon_pos_per_class.tolist(),
            "epsilon_neg_per_class": self.epsilon_neg_per_class.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def pseudo_label_error(
    pseudo: np.ndarray, truth: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Per-class missed-positive and spurious-positive rates; the headline
    value is the largest per-class sum. -1 counts as a negative assignment."""
    pseudo = np.asarray(pseudo)
    truth = np.asarray(truth)
    if pseudo.shape != truth.shape:
        raise MetricError(f"shape mismatch {pseudo.shape} vs {truth.shape}")
    m = pseudo.shape[0]
    eps_pos = ((truth == 1) & (pseudo != 1)).sum(axis=0) / m
    eps_neg = ((truth == 0) & (pseudo == 1)).sum(axis=0) / m
    return float((eps_pos + eps_neg).max()), eps_pos, eps_neg


def pseudo_label_report(pseudo: np.ndarray, truth: np.ndarray) -> PseudoLabelReport:
    pseudo = np.asarray(pseudo)
    truth = np.asarray(truth)
    tp, fp, fn = _confusion(pseudo, truth)
    precision = np.divide(tp, tp + fp, out=np.zeros_like(tp), where=(tp + fp) > 0)
    recall = np.divide(tp, tp + fn, out=np.zeros_like(tp), where=(tp + fn) > 0)
    cf1, of1 = cf1_of1(pseudo, truth)
    epsilon, eps_pos, eps_neg = pseudo_label_error(pseudo, truth)
    worst = int((eps_pos + eps_neg).argmax())
    return PseudoLabelReport(
        precision=precision,
        recall=recall,
        cf1=cf1,
        of1=of1,
        epsilon=epsilon,
        epsilon_pos=float(eps_pos[worst]),
        epsilon_neg=float(eps_neg[worst]),
        epsilon_pos_per_class=eps_pos,
        epsilon_neg_per_class=eps_neg,
    )
