"""Multi-label datasets: synthetic generation, splitting, CSV I/O, and
class-distribution estimation.

The ground-truth labels of unlabeled instances are reachable only through
:class:`HiddenLabelOracle`, which counts every read. Training code must never
touch them; evaluation and bound-checking code goes through the oracle.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """A configuration field is out of its allowed range."""


class SplitError(ValueError):
    """Requested split proportions cannot be realized."""


class ParseError(ValueError):
    """A dataset file is malformed."""


@dataclass
class MultiLabelDataset:
    features: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N, q) int8 in {0, 1}
    class_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise ConfigError("features and labels must be 2-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ConfigError("features and labels row counts differ")
        if self.labels.shape[1] < 2:
            raise ConfigError("need at least 2 classes")
        if not np.isin(self.labels, (0, 1)).all():
            raise ConfigError("labels must be 0/1")

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]


@dataclass
class SSMLLSplit:
    labeled_indices: np.ndarray
    unlabeled_indices: np.ndarray
    test_indices: np.ndarray
    labeled_proportion: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "labeled": self.labeled_indices.tolist(),
                "unlabeled": self.unlabeled_indices.tolist(),
                "test": self.test_indices.tolist(),
                "p": self.labeled_proportion,
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SSMLLSplit":
        obj = json.loads(text)
        return cls(
            labeled_indices=np.asarray(obj["labeled"], dtype=np.int64),
            unlabeled_indices=np.asarray(obj["unlabeled"], dtype=np.int64),
            test_indices=np.asarray(obj["test"], dtype=np.int64),
            labeled_proportion=float(obj["p"]),
            seed=int(obj["seed"]),
        )


class DistributionSource(str, Enum):
    ESTIMATED_FROM_LABELED = "estimated_from_labeled"
    TRUE_FROM_UNLABELED = "true_from_unlabeled"


@dataclass
class ClassDistribution:
    """Per-class positive (gamma) and negative (rho) label proportions."""

    gamma: np.ndarray
    rho: np.ndarray
    source: DistributionSource

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if self.gamma.shape != self.rho.shape:
            raise ConfigError("gamma and rho shapes differ")
        if not np.allclose(self.gamma + self.rho, 1.0, atol=1e-12):
            raise ConfigError("gamma + rho must equal 1 per class")
        if (self.gamma < 0).any() or (self.gamma > 1).any():
            raise ConfigError("gamma entries must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticConfig:
    num_instances: int
    num_classes: int
    feature_dim: int
    imbalance_ratio: float = 1.0
    base_positive_rate: float = 0.3
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_instances < 1:
            raise ConfigError("num_instances must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.imbalance_ratio < 1.0:
            raise ConfigError("imbalance_ratio must be >= 1")
        if not 0.0 < self.base_positive_rate < 1.0:
            raise ConfigError("base_positive_rate must be in (0, 1)")
        if not 0.0 <= self.label_noise < 0.5:
            raise ConfigError("label_noise must be in [0, 0.5)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def class_priors(config: SyntheticConfig) -> np.ndarray:
    """Geometric long-tail interpolation from the base rate down by the ratio."""
    k = np.arange(config.num_classes, dtype=np.float64)
    return config.base_positive_rate * config.imbalance_ratio ** (
        -k / (config.num_classes - 1)
    )


def _inv_norm_cdf(p: float) -> float:
    from statistics import NormalDist

    return NormalDist().inv_cdf(p)


def generate_synthetic(config: SyntheticConfig) -> MultiLabelDataset:
    """Draw a learnable long-tail multi-label dataset.

    Labels come from a hidden linear scoring model on Gaussian features: class k
    fires when the (approximately standard normal) score clears the quantile
    matching its prior, smoothed by a sharp sigmoid so label draws carry
    sampling noise. Fully determined by the seed.
    """
    rng = np.random.default_rng(config.seed)
    priors = class_priors(config)
    X = rng.standard_normal((config.num_instances, config.feature_dim))
    W = rng.standard_normal((config.feature_dim, config.num_classes))
    scores = X @ W / math.sqrt(config.feature_dim)
    cuts = np.array([_inv_norm_cdf(1.0 - p) for p in priors])
    temperature = 0.25
    prob_pos = 1.0 / (1.0 + np.exp(-(scores - cuts) / temperature))
    labels = (rng.random(prob_pos.shape) < prob_pos).astype(np.int8)
    if config.label_noise > 0.0:
        flips = rng.random(labels.shape) < config.label_noise
        labels = np.where(flips, 1 - labels, labels).astype(np.int8)
    return MultiLabelDataset(features=X, labels=labels)


def split(
    dataset: MultiLabelDataset, p: float, test_fraction: float, seed: int
) -> SSMLLSplit:
    """Carve the test set first, then take proportion p of the remainder as
    labeled; everything else is unlabeled."""
    if not 0.0 < p < 1.0:
        raise SplitError("p must be in (0, 1)")
    if not 0.0 <= test_fraction < 1.0:
        raise SplitError("test_fraction must be in [0, 1)")
    N = dataset.num_instances
    rng = np.random.default_rng(seed)
    perm = rng.permutation(N)
    test_count = int(round(test_fraction * N))
    remainder = N - test_count
    n = int(round(p * remainder))
    m = remainder - n
    if n < 1 or m < 1:
        raise SplitError(
            f"split infeasible: N={N}, test={test_count} leaves n={n}, m={m}"
        )
    return SSMLLSplit(
        labeled_indices=np.sort(perm[test_count : test_count + n]),
        unlabeled_indices=np.sort(perm[test_count + n :]),
        test_indices=np.sort(perm[:test_count]),
        labeled_proportion=p,
        seed=seed,
    )


def estimate_class_distribution(
    dataset: MultiLabelDataset,
    indices: np.ndarray,
    source: DistributionSource = DistributionSource.ESTIMATED_FROM_LABELED,
) -> ClassDistribution:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ConfigError("cannot estimate a class distribution from no indices")
    gamma = dataset.labels[indices].mean(axis=0)
    return ClassDistribution(gamma=gamma, rho=1.0 - gamma, source=source)


class HiddenLabelOracle:
    """Gated accessor to ground-truth labels of unlabeled instances.

    Every call to :meth:`true_labels` increments ``read_count``; pseudo-label
    assignment must leave the counter untouched.
    """

    def __init__(self, dataset: MultiLabelDataset, split: SSMLLSplit):
        self._labels = dataset.labels
        self._unlabeled = split.unlabeled_indices
        self.read_count = 0

    def true_labels(self, indices: np.ndarray | None = None) -> np.ndarray:
        self.read_count += 1
        if indices is None:
            indices = self._unlabeled
        return self._labels[np.asarray(indices, dtype=np.int64)].copy()


def save_csv(dataset: MultiLabelDataset, path: str | Path) -> None:
    """Write ``f0..f{d-1},y0..y{q-1}`` rows; features with full precision."""
    d, q = dataset.feature_dim, dataset.num_classes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(d)] + [f"y{k}" for k in range(q)])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.17g}" for v in x] + [str(int(v)) for v in y])


def load_csv(path: str | Path) -> MultiLabelDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: no data rows") from None
        d = sum(1 for c in header if c.startswith("f"))
        q = sum(1 for c in header if c.startswith("y"))
        if d < 1 or q < 2 or d + q != len(header):
            raise ParseError(f"{path}: bad header {header!r}")
        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + q:
                raise ParseError(
                    f"{path}: line {lineno}: expected {d + q} columns, got {len(row)}"
                )
            try:
                x = [float(v) for v in row[:d]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            y = []
            for v in row[d:]:
                if v not in ("0", "1"):
                    raise ParseError(
                        f"{path}: line {lineno}: non-binary label {v!r}"
                    )
                y.append(int(v))
            features.append(x)
            labels.append(y)
    if not features:
        raise ParseError(f"{path}: no data rows")
    return MultiLabelDataset(
        features=np.asarray(features), labels=np.asarray(labels, dtype=np.int8)
    )
