"""Alternating training loop: supervised warm-up, then per-epoch pseudo-label
assignment followed by SGD on the combined objective with labeled and
unlabeled terms weighted 1/n and 1/m."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import loss as loss_mod
from . import metrics as metrics_mod
from . import model as model_mod
from . import pseudolabel as pl
from .dataset import (
    ClassDistribution,
    DistributionSource,
    HiddenLabelOracle,
    MultiLabelDataset,
    SSMLLSplit,
    estimate_class_distribution,
)
from .loss import LossConfig
from .model import ClassifierModel, EmaShadow, OptimizerState
from .pseudolabel import ReliableInterval

STRATEGIES = ("top1", "topk", "global_threshold", "cap")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "cap"
    loss: LossConfig = field(default_factory=LossConfig)
    eta_pos: float = 1.0
    eta_neg: float = 1.0
    global_tau: float = 0.5
    warmup_epochs: int = 12
    total_epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    ema_decay: float = 0.9997
    seed: int = 1
    pseudo_label_refresh: str = "per_epoch"  # "per_epoch" | "per_batch"
    architecture: str = "linear"  # "linear" | "one_hidden"
    hidden_units: int = 32
    optimizer: str = "sgd"  # "sgd" | "adam"
    use_ema_for_pseudo: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.warmup_epochs > self.total_epochs:
            raise ValueError("warmup_epochs must be <= total_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.pseudo_label_refresh not in ("per_epoch", "per_batch"):
            raise ValueError("pseudo_label_refresh must be per_epoch or per_batch")
        if self.architecture not in ("linear", "one_hidden"):
            raise ValueError("architecture must be linear or one_hidden")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be sgd or adam")

    @property
    def interval(self) -> ReliableInterval:
        return ReliableInterval(self.eta_pos, self.eta_neg)

    def to_dict(self) -> dict:
        obj = {
            k: getattr(self, k)
            for k in (
                "strategy",
                "eta_pos",
                "eta_neg",
                "global_tau",
                "warmup_epochs",
                "total_epochs",
                "batch_size",
                "learning_rate",
                "ema_decay",
                "seed",
                "pseudo_label_refresh",
                "architecture",
                "hidden_units",
                "optimizer",
                "use_ema_for_pseudo",
            )
        }
        obj["loss"] = self.loss.to_dict()
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "loss" in obj:
            obj["loss"] = LossConfig.from_dict(obj["loss"])
        return cls(**obj)


@dataclass
class EpochRecord:
    epoch: int
    sup_loss: float
    unsup_loss: float
    map_raw: float
    map_ema: float
    cf1: float
    of1: float
    epsilon: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    oracle_reads_during_assignment: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "sup_loss", "unsup_loss", "map_raw", "map_ema", "cf1", "of1", "epsilon"]
            )
            for r in self.records:
                writer.writerow(
                    [r.epoch]
                    + [
                        f"{v:.12g}"
                        for v in (
                            r.sup_loss,
                            r.unsup_loss,
                            r.map_raw,
                            r.map_ema,
                            r.cf1,
                            r.of1,
                            r.epsilon,
                        )
                    ]
                )


@dataclass
class TrainResult:
    model: ClassifierModel
    ema: EmaShadow
    history: TrainingHistory
    pseudo_labels: np.ndarray | None = None  # last-round assignment


def _entry_losses(probs, targets, config: LossConfig):
    return loss_mod.elementwise(probs, targets, config)


def _check_finite(value: float, context: str):
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss during {context}")


def assign_pseudo_labels(
    probs: np.ndarray,
    config: ExperimentConfig,
    labeled_labels: np.ndarray,
) -> np.ndarray:
    """Dispatch to the configured strategy. Sees only the prediction matrix and
    labeled-set labels, never unlabeled ground truth."""
    if config.strategy == "top1":
        return pl.top1(probs)
    if config.strategy == "topk":
        l = pl.average_positive_count(labeled_labels)
        return pl.topk(probs, l)
    if config.strategy == "global_threshold":
        return pl.global_threshold(probs, config.global_tau)
    gamma = labeled_labels.mean(axis=0)
    dist = ClassDistribution(
        gamma=gamma, rho=1.0 - gamma, source=DistributionSource.ESTIMATED_FROM_LABELED
    )
    table = pl.cat_thresholds(probs, dist, config.interval)
    return pl.cap_assign(probs, table)


def evaluate_objective(
    model: ClassifierModel,
    X_l: np.ndarray,
    Y_l: np.ndarray,
    X_u: np.ndarray,
    pseudo: np.ndarray,
    config: LossConfig,
) -> tuple[float, float]:
    """The combined objective exactly as optimized: mean over labeled instances
    of the per-instance class-sum loss, plus the same over unlabeled instances
    with ignored entries contributing zero."""
    sup = float(_entry_losses(model_mod.forward(model, X_l), Y_l, config)[0].sum()) / len(X_l)
    unsup = float(_entry_losses(model_mod.forward(model, X_u), pseudo, config)[0].sum()) / len(X_u)
    return sup, unsup


def _train_epochs(
    *,
    model: ClassifierModel,
    ema: EmaShadow,
    opt: OptimizerState,
    rng: np.random.Generator,
    dataset: MultiLabelDataset,
    split: SSMLLSplit,
    config: ExperimentConfig,
    oracle: HiddenLabelOracle,
    history: TrainingHistory,
    start_epoch: int,
) -> np.ndarray | None:
    X_l = dataset.features[split.labeled_indices]
    Y_l = dataset.labels[split.labeled_indices]
    X_u = dataset.features[split.unlabeled_indices]
    X_t = dataset.features[split.test_indices]
    Y_t = dataset.labels[split.test_indices]
    n, m = len(X_l), len(X_u)
    total = n + m
    b_l = max(1, int(round(config.batch_size * n / total)))
    b_u = max(1, config.batch_size - b_l)
    steps = max(1, math.ceil(m / b_u))
    pseudo = None

    for epoch in range(start_epoch, config.total_epochs):
        pred_model = ema.as_model(model) if config.use_ema_for_pseudo else model
        probs_u = model_mod.forward(pred_model, X_u)
        reads_before = oracle.read_count
        pseudo = assign_pseudo_labels(probs_u, config, Y_l)
        history.oracle_reads_during_assignment += oracle.read_count - reads_before

        perm_l = rng.permutation(n)
        perm_u = rng.permutation(m)
        for step in range(steps):
            if config.pseudo_label_refresh == "per_batch" and step > 0:
                pred_model = ema.as_model(model) if config.use_ema_for_pseudo else model
                probs_u = model_mod.forward(pred_model, X_u)
                reads_before = oracle.read_count
                pseudo = assign_pseudo_labels(probs_u, config, Y_l)
                history.oracle_reads_during_assignment += (
                    oracle.read_count - reads_before
                )
            idx_l = perm_l[np.arange(step * b_l, (step + 1) * b_l) % n]
            lo = step * b_u
            idx_u = perm_u[lo : lo + b_u]
            if idx_u.size == 0:
                idx_u = perm_u[np.arange(lo, lo + b_u) % m]

            probs_bl = model_mod.forward(model, X_l[idx_l])
            loss_l, grad_l = _entry_losses(probs_bl, Y_l[idx_l], config.loss)
            probs_bu = model_mod.forward(model, X_u[idx_u])
            loss_u, grad_u = _entry_losses(probs_bu, pseudo[idx_u], config.loss)
            _check_finite(
                float(loss_l.sum() + loss_u.sum()),
                f"epoch {epoch}, labeled batch {idx_l.tolist()}, "
                f"unlabeled batch {idx_u.tolist()}",
            )
            grads_l = model_mod.backward(model, X_l[idx_l], grad_l / len(idx_l))
            grads_u = model_mod.backward(model, X_u[idx_u], grad_u / len(idx_u))
            grads = {k: grads_l[k] + grads_u[k] for k in grads_l}
            model_mod.optimizer_step(opt, model, grads)
            model_mod.ema_update(ema, model)

        sup, unsup = evaluate_objective(model, X_l, Y_l, X_u, pseudo, config.loss)
        map_raw = map_ema = float("nan")
        if len(X_t) and Y_t.sum() > 0:
            map_raw = metrics_mod.mean_average_precision(
                model_mod.forward(model, X_t), Y_t
            )
            map_ema = metrics_mod.mean_average_precision(
                model_mod.forward(ema.as_model(model), X_t), Y_t
            )
        truth_u = oracle.true_labels()
        report = metrics_mod.pseudo_label_report(pseudo, truth_u)
        history.records.append(
            EpochRecord(
                epoch=epoch,
                sup_loss=sup,
                unsup_loss=unsup,
                map_raw=map_raw,
                map_ema=map_ema,
                cf1=report.cf1,
                of1=report.of1,
                epsilon=report.epsilon,
            )
        )
    return pseudo


def _warmup_epoch(model, ema, opt, rng, X_l, Y_l, config: ExperimentConfig):
    n = len(X_l)
    steps = max(1, math.ceil(n / config.batch_size))
    perm = rng.permutation(n)
    for step in range(steps):
        idx = perm[step * config.batch_size : (step + 1) * config.batch_size]
        if idx.size == 0:
            continue
        probs = model_mod.forward(model, X_l[idx])
        loss, grad = _entry_losses(probs, Y_l[idx], config.loss)
        _check_finite(float(loss.sum()), "warm-up")
        grads = model_mod.backward(model, X_l[idx], grad / len(idx))
        model_mod.optimizer_step(opt, model, grads)
        model_mod.ema_update(ema, model)


def warmup(
    model: ClassifierModel,
    ema: EmaShadow,
    opt: OptimizerState,
    rng: np.random.Generator,
    X_l: np.ndarray,
    Y_l: np.ndarray,
    config: ExperimentConfig,
) -> ClassifierModel:
    """Supervised-only epochs on the labeled set; EMA updated every step."""
    if len(X_l) == 0:
        raise TrainingError("empty labeled set")
    for _ in range(config.warmup_epochs):
        _warmup_epoch(model, ema, opt, rng, X_l, Y_l, config)
    return model


def _fresh_state(dataset: MultiLabelDataset, config: ExperimentConfig):
    model = ClassifierModel.init(
        config.architecture,
        dataset.feature_dim,
        dataset.num_classes,
        config.seed,
        config.hidden_units,
    )
    ema = EmaShadow.from_model(model, config.ema_decay)
    opt = OptimizerState(learning_rate=config.learning_rate, kind=config.optimizer)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0FFEE]))
    return model, ema, opt, rng


def train(
    dataset: MultiLabelDataset, split: SSMLLSplit, config: ExperimentConfig
) -> TrainResult:
    model, ema, opt, rng = _fresh_state(dataset, config)
    oracle = HiddenLabelOracle(dataset, split)
    X_l = dataset.features[split.labeled_indices]
    Y_l = dataset.labels[split.labeled_indices]
    if len(X_l) == 0:
        raise TrainingError("empty labeled set")
    X_t = dataset.features[split.test_indices]
    Y_t = dataset.labels[split.test_indices]
    history = TrainingHistory()
    nan = float("nan")
    for epoch in range(config.warmup_epochs):
        _warmup_epoch(model, ema, opt, rng, X_l, Y_l, config)
        sup = float(
            _entry_losses(model_mod.forward(model, X_l), Y_l, config.loss)[0].sum()
        ) / len(X_l)
        map_raw = map_ema = nan
        if len(X_t) and Y_t.sum() > 0:
            map_raw = metrics_mod.mean_average_precision(
                model_mod.forward(model, X_t), Y_t
            )
            map_ema = metrics_mod.mean_average_precision(
                model_mod.forward(ema.as_model(model), X_t), Y_t
            )
        history.records.append(
            EpochRecord(epoch, sup, nan, map_raw, map_ema, nan, nan, nan)
        )
    pseudo = _train_epochs(
        model=model,
        ema=ema,
        opt=opt,
        rng=rng,
        dataset=dataset,
        split=split,
        config=config,
        oracle=oracle,
        history=history,
        start_epoch=config.warmup_epochs,
    )
    return TrainResult(model=model, ema=ema, history=history, pseudo_labels=pseudo)


def _checkpoint_hash(model: ClassifierModel, ema: EmaShadow) -> str:
    h = hashlib.sha256()
    for name in sorted(model.params):
        h.update(name.encode())
        h.update(model.params[name].tobytes())
    for name in sorted(ema.params):
        h.update(ema.params[name].tobytes())
    return h.hexdigest()


@dataclass
class StrategyResult:
    strategy: str
    map_raw: float
    map_ema: float
    cf1: float
    of1: float
    epsilon: float
    first_round_cf1: float
    first_round_of1: float
    first_round_epsilon: float
    checkpoint_hash: str


@dataclass
class ComparisonReport:
    results: list[StrategyResult]
    checkpoint_hash: str

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "checkpoint_hash": self.checkpoint_hash,
                    "results": [vars(r) for r in self.results],
                },
                fh,
                indent=2,
            )

    def to_csv(self, path) -> None:
        cols = [
            "strategy",
            "map_raw",
            "map_ema",
            "cf1",
            "of1",
            "epsilon",
            "first_round_cf1",
            "first_round_of1",
            "first_round_epsilon",
            "checkpoint_hash",
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for r in self.results:
                writer.writerow([getattr(r, c) for c in cols])


def compare_strategies(
    dataset: MultiLabelDataset,
    split: SSMLLSplit,
    base_config: ExperimentConfig,
    strategies: list[str],
) -> ComparisonReport:
    """Train every strategy from one shared warm-up checkpoint so the arms
    differ only in pseudo-labeling; also record the first-round snapshot taken
    before any unlabeled gradient step."""
    model0, ema0, opt0, rng0 = _fresh_state(dataset, base_config)
    X_l = dataset.features[split.labeled_indices]
    Y_l = dataset.labels[split.labeled_indices]
    warmup(model0, ema0, opt0, rng0, X_l, Y_l, base_config)
    ckpt_hash = _checkpoint_hash(model0, ema0)
    rng_state = rng0.bit_generator.state

    X_u = dataset.features[split.unlabeled_indices]
    pred0 = ema0.as_model(model0) if base_config.use_ema_for_pseudo else model0
    probs0 = model_mod.forward(pred0, X_u)

    results = []
    for strategy in strategies:
        config = replace(base_config, strategy=strategy)
        oracle = HiddenLabelOracle(dataset, split)
        first_pseudo = assign_pseudo_labels(probs0, config, Y_l)
        first = metrics_mod.pseudo_label_report(first_pseudo, oracle.true_labels())

        model = model0.copy()
        ema = EmaShadow(
            {k: v.copy() for k, v in ema0.params.items()}, ema0.decay
        )
        opt = OptimizerState(
            learning_rate=opt0.learning_rate, kind=opt0.kind, step=opt0.step
        )
        rng = np.random.default_rng()
        rng.bit_generator.state = rng_state
        history = TrainingHistory()
        _train_epochs(
            model=model,
            ema=ema,
            opt=opt,
            rng=rng,
            dataset=dataset,
            split=split,
            config=config,
            oracle=oracle,
            history=history,
            start_epoch=config.warmup_epochs,
        )
        last = history.records[-1]
        results.append(
            StrategyResult(
                strategy=strategy,
                map_raw=last.map_raw,
                map_ema=last.map_ema,
                cf1=last.cf1,
                of1=last.of1,
                epsilon=last.epsilon,
                first_round_cf1=first.cf1,
                first_round_of1=first.of1,
                first_round_epsilon=first.epsilon,
                checkpoint_hash=ckpt_hash,
            )
        )
    return ComparisonReport(results=results, checkpoint_hash=ckpt_hash)
