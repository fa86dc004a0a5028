"""Empirical verification of the class-proportion concentration bound.

The bound: with probability above 1 - 2/n - 2/m, the estimated (size-n sample)
and true (size-m sample) per-class positive proportions differ by at most
sqrt(log n / 2n) + sqrt(log m / 2m), simultaneously for all classes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    DistributionSource,
    HiddenLabelOracle,
    MultiLabelDataset,
    SSMLLSplit,
    estimate_class_distribution,
)


class DomainError(ValueError):
    pass


def hoeffding_bound(n: int, m: int) -> float:
    """sqrt(log n / 2n) + sqrt(log m / 2m), natural log."""
    if n < 2 or m < 2:
        raise DomainError("n and m must both be >= 2")
    return math.sqrt(math.log(n) / (2 * n)) + math.sqrt(math.log(m) / (2 * m))


@dataclass(frozen=True)
class BoundTrial:
    n: int
    m: int
    q: int
    priors: tuple[float, ...]
    trials: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 2:
            raise DomainError("n and m must both be >= 2")
        if self.trials < 100:
            raise DomainError("need at least 100 trials")
        if len(self.priors) != self.q:
            raise DomainError("need one prior per class")
        if any(not 0.0 < p < 1.0 for p in self.priors):
            raise DomainError("priors must lie in the open interval (0, 1)")


@dataclass
class CoverageReport:
    n: int
    m: int
    q: int
    trials: int
    bound: float
    max_gap_quantiles: dict[str, float]
    violation_rate: float
    theoretical_rate: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "q": self.q,
            "trials": self.trials,
            "bound": self.bound,
            "max_gap_quantiles": self.max_gap_quantiles,
            "violation_rate": self.violation_rate,
            "theoretical_rate": self.theoretical_rate,
            "slack": self.slack,
            "passed": self.passed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def verify_theorem1(trial: BoundTrial) -> CoverageReport:
    """Monte Carlo coverage check of the concentration bound.

    Each trial draws the two samples i.i.d. from the priors; per-class positive
    counts are drawn directly as binomials, which is distributionally identical
    to drawing full label matrices and column-averaging them.
    """
    rng = np.random.default_rng(trial.seed)
    priors = np.asarray(trial.priors)
    gamma_hat = rng.binomial(trial.n, priors, size=(trial.trials, trial.q)) / trial.n
    gamma_star = rng.binomial(trial.m, priors, size=(trial.trials, trial.q)) / trial.m
    max_gaps = np.abs(gamma_hat - gamma_star).max(axis=1)
    bound = hoeffding_bound(trial.n, trial.m)
    violations = int((max_gaps > bound).sum())
    rate = violations / trial.trials
    theoretical = 2.0 / trial.n + 2.0 / trial.m
    slack = 3.0 * math.sqrt(max(rate * (1.0 - rate), 1.0 / trial.trials) / trial.trials)
    quantiles = {
        str(p): float(np.quantile(max_gaps, p)) for p in (0.5, 0.9, 0.99, 1.0)
    }
    return CoverageReport(
        n=trial.n,
        m=trial.m,
        q=trial.q,
        trials=trial.trials,
        bound=bound,
        max_gap_quantiles=quantiles,
        violation_rate=rate,
        theoretical_rate=theoretical,
        slack=slack,
        passed=rate <= theoretical + slack,
    )


@dataclass
class OverlapCurve:
    gamma_hat: np.ndarray
    gamma_star: np.ndarray
    max_gap: float
    bound: float

    def rows(self):
        for k, (gh, gs) in enumerate(zip(self.gamma_hat, self.gamma_star)):
            yield k, float(gh), float(gs)


def distribution_overlap_curve(
    dataset: MultiLabelDataset, split: SSMLLSplit, oracle: HiddenLabelOracle
) -> OverlapCurve:
    """Paired estimated/true per-class positive proportions plus the bound they
    should stay under."""
    est = estimate_class_distribution(
        dataset, split.labeled_indices, DistributionSource.ESTIMATED_FROM_LABELED
    )
    true_labels = oracle.true_labels()
    gamma_star = true_labels.mean(axis=0)
    n = len(split.labeled_indices)
    m = len(split.unlabeled_indices)
    return OverlapCurve(
        gamma_hat=est.gamma,
        gamma_star=gamma_star,
        max_gap=float(np.abs(est.gamma - gamma_star).max()),
        bound=hoeffding_bound(n, m) if n >= 2 and m >= 2 else float("nan"),
    )
