"""Command-line entry point: dataset generation, training, strategy
comparison, and concentration-bound verification.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import dataset as ds
from . import theory
from . import trainer as tr

USAGE_ERROR = 2
RUNTIME_ERROR = 1

# cli names for the trainer's strategy identifiers; "iat" is the
# instance-aware-threshold baseline (global threshold).
STRATEGY_ALIASES = {
    "top1": "top1",
    "topk": "topk",
    "iat": "global_threshold",
    "global_threshold": "global_threshold",
    "cap": "cap",
}


def _sha256_files(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace, inputs, started: float):
    manifest = {
        "command": command,
        "config": str(getattr(args, "config", "") or ""),
        "seed": int(getattr(args, "seed", 0) or 0),
        "input_hash": _sha256_files(inputs),
        "output_dir": str(out_dir),
        "started_at": started,
        "finished_at": time.time(),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def cmd_generate(args) -> int:
    started = time.time()
    config = ds.SyntheticConfig(
        num_instances=args.n,
        num_classes=args.q,
        feature_dim=args.d,
        imbalance_ratio=args.imbalance,
        base_positive_rate=args.rate,
        label_noise=args.noise,
        seed=args.seed,
    )
    dataset = ds.generate_synthetic(config)
    split = ds.split(dataset, args.p, args.test_fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.save_csv(dataset, out / "dataset.csv")
    (out / "split.json").write_text(split.to_json())
    _write_manifest(out, "generate", args, [out / "dataset.csv", out / "split.json"], started)
    print(f"wrote {out / 'dataset.csv'} and {out / 'split.json'}")
    return 0


def _load_experiment_config(args) -> tr.ExperimentConfig:
    obj = {}
    if args.config:
        with open(args.config) as fh:
            obj = json.load(fh)
    # flags beat the config file
    overrides = {
        "strategy": STRATEGY_ALIASES.get(args.strategy) if args.strategy else None,
        "eta_pos": args.eta_pos,
        "eta_neg": args.eta_neg,
        "global_tau": args.tau,
        "total_epochs": args.epochs,
        "warmup_epochs": args.warmup_epochs,
        "seed": args.seed,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
    }
    for key, value in overrides.items():
        if value is not None:
            obj[key] = value
    try:
        return tr.ExperimentConfig.from_dict(obj)
    except (TypeError, ValueError) as exc:
        raise ConfigUsageError(str(exc)) from exc


class ConfigUsageError(ValueError):
    pass


def _load_data(data_dir: str):
    data = Path(data_dir)
    dataset = ds.load_csv(data / "dataset.csv")
    split = ds.SSMLLSplit.from_json((data / "split.json").read_text())
    return dataset, split


def cmd_train(args) -> int:
    started = time.time()
    config = _load_experiment_config(args)
    dataset, split = _load_data(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = tr.train(dataset, split, config)
    result.history.to_csv(out / "history.csv")
    from .model import save_checkpoint

    save_checkpoint(out / "checkpoint.json", result.model, result.ema)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    _write_manifest(
        out,
        "train",
        args,
        [Path(args.data) / "dataset.csv", Path(args.data) / "split.json", out / "config.json"],
        started,
    )
    print(f"trained {config.strategy}; history at {out / 'history.csv'}")
    return 0


def cmd_compare(args) -> int:
    started = time.time()
    config = _load_experiment_config(args)
    dataset, split = _load_data(args.data)
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    unknown = [s for s in names if s not in STRATEGY_ALIASES]
    if unknown:
        raise ConfigUsageError(f"unknown strategies: {unknown}")
    strategies = [STRATEGY_ALIASES[s] for s in names]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = tr.compare_strategies(dataset, split, config, strategies)
    report.to_csv(out / "comparison.csv")
    report.to_json(out / "comparison.json")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    _write_manifest(
        out,
        "compare",
        args,
        [Path(args.data) / "dataset.csv", Path(args.data) / "split.json", out / "config.json"],
        started,
    )
    for r in report.results:
        print(
            f"{r.strategy}: mAP(ema)={r.map_ema:.4f} cf1={r.cf1:.4f} "
            f"of1={r.of1:.4f} eps={r.epsilon:.4f} first_cf1={r.first_round_cf1:.4f}"
        )
    return 0


def cmd_verify_bound(args) -> int:
    if args.trials < 100:
        raise ConfigUsageError("--trials must be at least 100")
    if not 0.0 < args.prior < 1.0:
        raise ConfigUsageError("--prior must lie strictly between 0 and 1")
    trial = theory.BoundTrial(
        n=args.n,
        m=args.m,
        q=args.q,
        priors=tuple([args.prior] * args.q),
        trials=args.trials,
        seed=args.seed,
    )
    report = theory.verify_theorem1(trial)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "coverage.json").write_text(text)
    print(text)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capml",
        description="Class-aware pseudo-labeling for semi-supervised multi-label learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset and split")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--q", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--imbalance", type=float, default=1.0)
    g.add_argument("--rate", type=float, default=0.3)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--p", type=float, default=0.05)
    g.add_argument("--test-fraction", type=float, default=0.2)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    def add_train_flags(p):
        p.add_argument("--config", default=None)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--strategy", choices=sorted(STRATEGY_ALIASES), default=None)
        p.add_argument("--eta-pos", type=float, default=None)
        p.add_argument("--eta-neg", type=float, default=None)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--warmup-epochs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--learning-rate", type=float, default=None)
        p.add_argument("--batch-size", type=int, default=None)

    t = sub.add_parser("train", help="run one training configuration")
    add_train_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="train several strategies from one warm-up")
    add_train_flags(c)
    c.add_argument("--strategies", default="top1,topk,iat,cap")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify-bound", help="Monte Carlo check of the proportion bound")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--m", type=int, required=True)
    v.add_argument("--q", type=int, required=True)
    v.add_argument("--trials", type=int, default=10000)
    v.add_argument("--prior", type=float, default=0.2)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except (ConfigUsageError, ds.ConfigError, ds.SplitError, theory.DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ds.ParseError, tr.TrainingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
