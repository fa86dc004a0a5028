"""Class-aware pseudo-labeling for semi-supervised multi-label learning."""

from .dataset import (
    ClassDistribution,
    DistributionSource,
    HiddenLabelOracle,
    MultiLabelDataset,
    SSMLLSplit,
    SyntheticConfig,
    estimate_class_distribution,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)
from .loss import LossConfig, supervised_loss, unlabeled_loss
from .model import ClassifierModel, EmaShadow, OptimizerState
from .pseudolabel import ReliableInterval, ThresholdTable, cap_assign, cat_thresholds
from .trainer import ExperimentConfig, compare_strategies, train

__version__ = "0.1.0"
