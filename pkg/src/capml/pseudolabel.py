"""Pseudo-labeling strategies.

Instance-aware baselines (argmax, top-l, per-instance / global threshold) and
the class-aware strategy: per-class thresholds chosen so the pseudo-label
proportions match the class distribution estimated from labeled data, with
reliable intervals that drop the least confident fraction (label -1).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from ._accel import rank_assign
from .dataset import ClassDistribution, DistributionSource

logger = logging.getLogger(__name__)


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class ReliableInterval:
    """Fractions of the most confident positive / negative pseudo-labels kept."""

    eta_pos: float = 1.0
    eta_neg: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_pos <= 1.0 or not 0.0 <= self.eta_neg <= 1.0:
            raise ContractError("eta_pos and eta_neg must be in [0, 1]")


@dataclass
class ThresholdTable:
    """Per-class threshold pair realized by order statistics: the top c_pos
    scores are positive, the bottom c_neg negative."""

    tau_alpha: np.ndarray  # (q,) score of the c_pos-th largest, +inf if c_pos=0
    tau_beta: np.ndarray  # (q,) score of the c_neg-th smallest, -inf if c_neg=0
    c_pos: np.ndarray  # (q,) int
    c_neg: np.ndarray  # (q,) int
    num_instances: int

    def to_csv(self, path, round_index: int = 0) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["round", "class", "c_pos", "c_neg", "tau_alpha", "tau_beta"]
            )
            for k in range(len(self.c_pos)):
                writer.writerow(
                    [
                        round_index,
                        k,
                        int(self.c_pos[k]),
                        int(self.c_neg[k]),
                        f"{self.tau_alpha[k]:.10g}",
                        f"{self.tau_beta[k]:.10g}",
                    ]
                )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def top1(probs: np.ndarray) -> np.ndarray:
    """One positive per row at the argmax; ties go to the lowest class index."""
    probs = np.asarray(probs)
    out = np.zeros(probs.shape, dtype=np.int8)
    out[np.arange(probs.shape[0]), probs.argmax(axis=1)] = 1
    return out


def topk(probs: np.ndarray, l: int) -> np.ndarray:
    """The l most probable classes per row become positive."""
    probs = np.asarray(probs)
    q = probs.shape[1]
    if not 1 <= l <= q:
        raise ContractError(f"l must be in [1, {q}], got {l}")
    order = np.argsort(-probs, axis=1, kind="stable")
    out = np.zeros(probs.shape, dtype=np.int8)
    rows = np.repeat(np.arange(probs.shape[0]), l)
    out[rows, order[:, :l].ravel()] = 1
    return out


def average_positive_count(labeled_labels: np.ndarray) -> int:
    """Round-half-up mean number of positives per labeled instance, clamped to
    [1, q]."""
    labels = np.asarray(labeled_labels)
    q = labels.shape[1]
    mean = float(labels.sum(axis=1).mean())
    return min(max(_round_half_up(mean), 1), q)


def global_threshold(probs: np.ndarray, tau: float) -> np.ndarray:
    return (np.asarray(probs) >= tau).astype(np.int8)


def instance_adaptive(probs: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Per-instance threshold comparison; constant taus reduce to the global
    threshold."""
    probs = np.asarray(probs)
    taus = np.asarray(taus, dtype=np.float64)
    if taus.shape != (probs.shape[0],):
        raise ContractError(f"need one threshold per row, got shape {taus.shape}")
    return (probs >= taus[:, None]).astype(np.int8)


def cat_thresholds(
    probs: np.ndarray,
    dist: ClassDistribution,
    interval: ReliableInterval = ReliableInterval(),
) -> ThresholdTable:
    """Class-distribution-aware thresholds.

    Per class k: c_pos = round(eta_pos * gamma_k * m) instances become
    positive and c_neg = round(eta_neg * rho_k * m) negative, with negatives
    clamped so the two sets never overlap (positives win a rounding collision).
    Thresholds are the corresponding order statistics of the score column.
    """
    probs = np.asarray(probs)
    m, q = probs.shape
    if m == 0:
        raise ContractError("need at least one unlabeled instance")
    if dist.source != DistributionSource.ESTIMATED_FROM_LABELED:
        raise ContractError(
            "thresholds must come from the labeled-data distribution estimate"
        )
    if len(dist.gamma) != q:
        raise ContractError("class count mismatch between scores and distribution")

    c_pos = np.empty(q, dtype=np.int64)
    c_neg = np.empty(q, dtype=np.int64)
    tau_alpha = np.empty(q)
    tau_beta = np.empty(q)
    for k in range(q):
        cp = _round_half_up(interval.eta_pos * dist.gamma[k] * m)
        cn = _round_half_up(interval.eta_neg * dist.rho[k] * m)
        cn = min(cn, m - cp)
        if dist.gamma[k] == 0.0:
            logger.warning(
                "class %d absent from labeled data; no positive pseudo-labels", k
            )
        col = np.sort(probs[:, k])
        tau_alpha[k] = col[m - cp] if cp > 0 else np.inf
        tau_beta[k] = col[cn - 1] if cn > 0 else -np.inf
        c_pos[k] = cp
        c_neg[k] = cn
    return ThresholdTable(tau_alpha, tau_beta, c_pos, c_neg, num_instances=m)


def cap_assign(probs: np.ndarray, table: ThresholdTable) -> np.ndarray:
    """Rank-based assignment honoring the table's counts exactly.

    Ties are broken by (score desc, instance asc) for positives and
    (score asc, instance asc) for negatives; anything in neither set is -1.
    """
    probs = np.asarray(probs)
    m, q = probs.shape
    if m != table.num_instances or q != len(table.c_pos):
        raise ContractError("score matrix does not match the threshold table")
    order_desc = np.argsort(-probs.T, axis=1, kind="stable")
    order_asc = np.argsort(probs.T, axis=1, kind="stable")
    return rank_assign(
        np.ascontiguousarray(order_desc),
        np.ascontiguousarray(order_asc),
        table.c_pos,
        table.c_neg,
        m,
        q,
    )


def save_pseudo_labels_csv(pseudo: np.ndarray, path) -> None:
    np.savetxt(path, pseudo, fmt="%d", delimiter=",")
