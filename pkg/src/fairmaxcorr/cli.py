"""Experiment runner: regularization sweeps and few-shot adaptation runs.

A sweep fits one model per (lambda, seed) pair, evaluates it on the test
split, and appends one row to a CSV of tradeoff points; rows are sorted by
(lambda, seed) and floats printed at 9 significant digits, so identical
configs and seeds reproduce the file byte for byte.  Wall-clock timings and
environment versions go to a JSON metadata sidecar, never into the CSV.
Failed points become rows with an error tag instead of aborting the sweep.

Exit codes: 0 success, 1 configuration error, 2 ingestion error, 3 sweep
finished with tagged failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, datasets, discrete, metrics, soft_hgr
from .errors import (
    ConfigError,
    FairMaxCorrError,
    IngestionError,
    InfiniteDiscriminationError,
    UndefinedMetricError,
)

__all__ = [
    "ExperimentConfig",
    "TradeoffPoint",
    "validate_config",
    "validate_config_dict",
    "config_to_dict",
    "run_sweep",
    "run_few_shot",
    "main",
]

DATASET_PIPELINES = {
    "compas": "discrete",
    "adult": "discrete",
    "synth-discrete": "discrete",
    "cc": "continuous",
    "synth-continuous": "continuous",
}
FILE_DATASETS = ("compas", "adult", "cc")
CRITERIA = ("independence", "separation")

DISCRETE_COLUMNS = ["auc", "accuracy", "balanced_accuracy", "j", "deo_abs"]
CONTINUOUS_COLUMNS = ["mse", "mi", "cmi"]

_TRAIN_KEYS = {
    "epochs", "batch_size", "lr_model", "lr_critic", "critic_steps", "k",
    "feature_dim",
}
_CONFIG_KEYS = {
    "dataset", "data_path", "pipeline", "criterion", "lambda_grid", "seeds",
    "k", "smoothing", "train_fraction", "train_count", "test_count", "out",
    "synth_kind", "synth_n", "synth_params", "train", "few_shot",
    "few_shot_size", "few_shot_steps", "standardize_y", "standardize_d",
}


@dataclass
class ExperimentConfig:
    """Validated sweep description; see README for the file schema."""

    dataset: str
    pipeline: str
    criterion: str
    lambda_grid: list
    seeds: list
    out: str
    data_path: str | None = None
    k: int | None = None
    smoothing: float = 0.0
    train_fraction: float | None = 0.8
    train_count: int | None = None
    test_count: int | None = None
    synth_kind: str | None = None
    synth_n: int = 5000
    synth_params: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    few_shot: bool = False
    few_shot_size: int = 10
    few_shot_steps: int = 5
    standardize_y: bool = False
    standardize_d: bool = False


@dataclass
class TradeoffPoint:
    """One sweep row: metric values for a (lambda, seed) fit.

    ``wall_time_ms`` is reported in the metadata sidecar only, keeping the
    CSV deterministic.
    """

    lam: float
    seed: int
    values: dict
    wall_time_ms: float
    error: str = ""
    phase: str | None = None


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-dict echo of a config; stable under JSON round-trips."""
    return asdict(config)


def validate_config_dict(raw: dict):
    """Check every constraint and return (config-or-None, list of problems)."""
    problems = []
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        problems.append(f"unknown config key(s): {', '.join(unknown)}")

    dataset = raw.get("dataset")
    if dataset not in DATASET_PIPELINES:
        problems.append(
            f"dataset must be one of {sorted(DATASET_PIPELINES)}, got {dataset!r}"
        )
        dataset = None
    pipeline = raw.get("pipeline") or (DATASET_PIPELINES[dataset] if dataset else None)
    if pipeline not in ("discrete", "continuous"):
        problems.append(f"pipeline must be discrete or continuous, got {pipeline!r}")
    elif dataset and DATASET_PIPELINES[dataset] != pipeline:
        problems.append(f"dataset {dataset} requires the {DATASET_PIPELINES[dataset]} pipeline")

    criterion = raw.get("criterion")
    if criterion not in CRITERIA:
        problems.append(f"criterion must be one of {CRITERIA}, got {criterion!r}")

    grid = raw.get("lambda_grid")
    if not isinstance(grid, (list, tuple)) or len(grid) == 0:
        problems.append("lambda_grid must be a non-empty list")
        grid = []
    else:
        grid = [float(v) for v in grid]
        if any(b < a for a, b in zip(grid, grid[1:])):
            problems.append("lambda_grid must be ascending")
        if any(v < 0 for v in grid):
            problems.append("lambda values must be nonnegative")
        if (
            pipeline == "discrete"
            and criterion == "separation"
            and any(v >= 1.0 for v in grid)
        ):
            problems.append(
                "separation on the discrete pipeline requires every lambda in [0, 1)"
            )

    seeds = raw.get("seeds")
    if not isinstance(seeds, (list, tuple)) or len(seeds) == 0:
        problems.append("seeds must be a non-empty list of integers")
        seeds = []
    else:
        try:
            seeds = [int(s) for s in seeds]
        except (TypeError, ValueError):
            problems.append("seeds must be integers")
            seeds = []

    out = raw.get("out")
    if not out:
        problems.append("out (output CSV path) is required")

    if dataset in FILE_DATASETS and not raw.get("data_path"):
        problems.append(f"dataset {dataset} requires data_path")
    if dataset in ("synth-discrete", "synth-continuous") and not raw.get("synth_kind"):
        problems.append(f"dataset {dataset} requires synth_kind")

    smoothing = raw.get("smoothing", 0.0)
    if not isinstance(smoothing, (int, float)) or smoothing < 0:
        problems.append("smoothing must be a nonnegative number")

    fraction = raw.get("train_fraction", None)
    counts = raw.get("train_count"), raw.get("test_count")
    has_counts = any(c is not None for c in counts)
    if fraction is not None and not 0 < float(fraction) < 1:
        problems.append("train_fraction must be in (0, 1)")
    if has_counts and (counts[0] is None or counts[1] is None):
        problems.append("train_count and test_count must be given together")

    train = raw.get("train", {})
    if not isinstance(train, dict):
        problems.append("train must be a mapping of TrainConfig overrides")
        train = {}
    else:
        bad = sorted(set(train) - _TRAIN_KEYS)
        if bad:
            problems.append(f"unknown train override(s): {', '.join(bad)}")

    if raw.get("few_shot") and pipeline != "continuous":
        problems.append("few-shot runs require the continuous pipeline")

    if problems:
        return None, problems
    config = ExperimentConfig(
        dataset=dataset,
        pipeline=pipeline,
        criterion=criterion,
        lambda_grid=grid,
        seeds=seeds,
        out=out,
        data_path=raw.get("data_path"),
        k=int(raw["k"]) if raw.get("k") is not None else None,
        smoothing=float(smoothing),
        train_fraction=None if has_counts else float(fraction if fraction is not None else 0.8),
        train_count=int(counts[0]) if has_counts else None,
        test_count=int(counts[1]) if has_counts else None,
        synth_kind=raw.get("synth_kind"),
        synth_n=int(raw.get("synth_n", 5000)),
        synth_params=dict(raw.get("synth_params", {})),
        train=dict(train),
        few_shot=bool(raw.get("few_shot", False)),
        few_shot_size=int(raw.get("few_shot_size", 10)),
        few_shot_steps=int(raw.get("few_shot_steps", 5)),
        standardize_y=bool(raw.get("standardize_y", False)),
        standardize_d=bool(raw.get("standardize_d", False)),
    )
    return config, []


def validate_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file; raises ConfigError with every
    violation found, not just the first."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a JSON object"])
    config, problems = validate_config_dict(raw)
    if problems:
        raise ConfigError(problems)
    return config


# ---------------------------------------------------------------------------
# Dataset plumbing
# ---------------------------------------------------------------------------

def _load_dataset(config: ExperimentConfig, seed: int):
    if config.dataset == "compas":
        return datasets.load_compas(config.data_path)
    if config.dataset == "adult":
        return datasets.load_adult(config.data_path)
    if config.dataset == "cc":
        return datasets.load_cc(config.data_path)
    if config.dataset == "synth-discrete":
        return datasets.synth_discrete(
            config.synth_kind, config.synth_n, seed=seed, **config.synth_params
        )
    return datasets.synth_continuous(
        config.synth_kind, config.synth_n, seed=seed, **config.synth_params
    )


def _split_spec(config: ExperimentConfig, seed: int) -> datasets.SplitSpec:
    if config.train_count is not None:
        return datasets.SplitSpec(
            train_count=config.train_count, test_count=config.test_count, seed=seed
        )
    return datasets.SplitSpec(train_fraction=config.train_fraction, seed=seed)


def _split(config: ExperimentConfig, data, seed: int):
    if config.pipeline == "discrete":
        return datasets.split(data, _split_spec(config, seed))
    return datasets.split(
        data,
        _split_spec(config, seed),
        standardize_y=config.standardize_y,
        standardize_d=config.standardize_d,
    )


# ---------------------------------------------------------------------------
# Point evaluation
# ---------------------------------------------------------------------------

def _eval_discrete(model, test):
    post = discrete.posterior_table(model)
    scores = post[test.x, 1]
    preds = np.argmax(post, axis=1)[test.x]
    values = {
        "auc": metrics.auc(scores, test.y),
        "accuracy": metrics.accuracy(preds, test.y),
        "balanced_accuracy": metrics.balanced_accuracy(preds, test.y),
    }
    tags = []
    try:
        values["j"] = metrics.discrimination_j(preds, test.d)
    except InfiniteDiscriminationError:
        values["j"] = math.inf
        tags.append("infinite_j")
    try:
        values["deo_abs"] = abs(metrics.deo(preds, test.y, test.d))
    except UndefinedMetricError as exc:
        tags.append(f"deo_undefined({exc})")
    return values, ";".join(tags)


def _eval_continuous(model, test):
    yhat = soft_hgr.predict(model, test.x)
    values = {
        "mse": metrics.mse(yhat, test.y),
        "mi": metrics.knn_mi(yhat, test.d),
        "cmi": metrics.knn_cmi(yhat, test.d, test.y),
    }
    return values, ""


def _fit_discrete_point(config, train, lam):
    return discrete.fit_discrete(
        train.x, train.y, train.d,
        criterion=config.criterion,
        lam=lam,
        k=config.k,
        card_x=train.card_x,
        card_y=train.card_y,
        card_d=train.card_d,
        smoothing=config.smoothing,
        x_encoder=train.encoders or None,
    )


def _train_config(config: ExperimentConfig, seed: int) -> soft_hgr.TrainConfig:
    overrides = dict(config.train)
    if config.k is not None:
        overrides.setdefault("k", config.k)
    return soft_hgr.TrainConfig(seed=seed, **overrides)


def _train_continuous_point(config, train, lam, seed):
    cfg = _train_config(config, seed)
    trainer = (
        soft_hgr.train_independence
        if config.criterion == "independence"
        else soft_hgr.train_separation
    )
    model, history = trainer(train, lam, cfg)
    if history.aborted:
        raise FairMaxCorrError(f"training aborted: {history.abort_reason}")
    return model


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def run_sweep(config: ExperimentConfig) -> list:
    """Fit and evaluate every (lambda, seed) point; write CSV + metadata.

    Returns the list of tradeoff points in output order.  Individual point
    failures are recorded as tagged rows and do not stop the sweep.
    """
    points = []
    for lam in sorted(config.lambda_grid):
        for seed in sorted(config.seeds):
            start = time.perf_counter()
            error = ""
            values = {}
            try:
                data = _load_dataset(config, seed)
                train, test = _split(config, data, seed)
                if config.pipeline == "discrete":
                    model = _fit_discrete_point(config, train, lam)
                    values, error = _eval_discrete(model, test)
                else:
                    model = _train_continuous_point(config, train, lam, seed)
                    values, error = _eval_continuous(model, test)
            except IngestionError:
                raise
            except FairMaxCorrError as exc:
                error = f"{type(exc).__name__}: {exc}"
            elapsed = (time.perf_counter() - start) * 1000.0
            points.append(TradeoffPoint(lam, seed, values, elapsed, error))
    columns = DISCRETE_COLUMNS if config.pipeline == "discrete" else CONTINUOUS_COLUMNS
    _write_points(config, points, columns, phase_column=False)
    return points


def run_few_shot(config: ExperimentConfig) -> list:
    """Few-shot adaptation experiment on the continuous pipeline.

    Per seed: train an unregularized baseline on the full train split, draw
    the few-shot subset, then adapt a copy per grid lambda.  Each (lambda,
    seed) pair gets a ``pre`` row (baseline metrics) and a ``post`` row.
    """
    if config.pipeline != "continuous":
        raise ConfigError(["few-shot runs require the continuous pipeline"])
    points = []
    for lam in sorted(config.lambda_grid):
        for seed in sorted(config.seeds):
            start = time.perf_counter()
            error = ""
            pre_values, post_values = {}, {}
            try:
                data = _load_dataset(config, seed)
                train, test = _split(config, data, seed)
                cfg = _train_config(config, seed)
                baseline = _train_continuous_point(config, train, 0.0, seed)
                pre_values, _ = _eval_continuous(baseline, test)
                few_idx = np.random.default_rng(seed).choice(
                    train.n, size=min(config.few_shot_size, train.n), replace=False
                )
                adapted = soft_hgr.few_shot_adapt(
                    baseline,
                    train.subset(few_idx),
                    lam,
                    steps=config.few_shot_steps,
                    cfg=cfg,
                    criterion=config.criterion,
                )
                post_values, _ = _eval_continuous(adapted, test)
            except IngestionError:
                raise
            except FairMaxCorrError as exc:
                error = f"{type(exc).__name__}: {exc}"
            elapsed = (time.perf_counter() - start) * 1000.0
            points.append(TradeoffPoint(lam, seed, pre_values, elapsed / 2, error, phase="pre"))
            points.append(TradeoffPoint(lam, seed, post_values, elapsed / 2, error, phase="post"))
    _write_points(config, points, CONTINUOUS_COLUMNS, phase_column=True)
    return points


def _format_value(v) -> str:
    if v is None:
        return ""
    return f"{v:.9g}"


def _write_points(config, points, columns, phase_column: bool) -> None:
    header = ["lambda", "seed"] + (["phase"] if phase_column else []) + columns + ["error"]
    with open(config.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in points:
            row = [_format_value(p.lam), str(p.seed)]
            if phase_column:
                row.append(p.phase or "")
            row += [_format_value(p.values.get(c)) for c in columns]
            row.append(p.error)
            writer.writerow(row)
    meta = {
        "config": config_to_dict(config),
        "versions": {
            "fairmaxcorr": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "points": [
            {
                "lambda": p.lam,
                "seed": p.seed,
                **({"phase": p.phase} if phase_column else {}),
                "wall_time_ms": round(p.wall_time_ms, 3),
                "error": p.error,
            }
            for p in points
        ],
    }
    with open(f"{config.out}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairmaxcorr",
        description="Sweep the fairness regularization weight and emit a "
        "performance-fairness tradeoff CSV.",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--dataset", choices=sorted(DATASET_PIPELINES))
    parser.add_argument("--data-path", dest="data_path", help="raw dataset file")
    parser.add_argument("--pipeline", choices=["discrete", "continuous"])
    parser.add_argument("--criterion", choices=list(CRITERIA))
    parser.add_argument("--lambdas", help="comma-separated ascending lambda grid")
    parser.add_argument("--seeds", help="comma-separated integer seeds")
    parser.add_argument("--k", type=int, help="number of feature functions")
    parser.add_argument("--smoothing", type=float, help="additive smoothing for joints")
    parser.add_argument("--train-fraction", dest="train_fraction", type=float)
    parser.add_argument("--synth-kind", dest="synth_kind")
    parser.add_argument("--synth-n", dest="synth_n", type=int)
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument(
        "--few-shot", dest="few_shot", action="store_true", default=None,
        help="run the few-shot adaptation experiment instead of a sweep",
    )
    return parser


def _parse_list(text: str, cast):
    return [cast(tok) for tok in text.split(",") if tok.strip() != ""]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    raw: dict = {}
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
            if not isinstance(raw, dict):
                raise ConfigError(["config root must be a JSON object"])
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        for problem in exc.problems:
            print(problem, file=sys.stderr)
        return 1

    overrides = {
        "dataset": args.dataset,
        "data_path": args.data_path,
        "pipeline": args.pipeline,
        "criterion": args.criterion,
        "k": args.k,
        "smoothing": args.smoothing,
        "train_fraction": args.train_fraction,
        "synth_kind": args.synth_kind,
        "synth_n": args.synth_n,
        "out": args.out,
        "few_shot": args.few_shot,
    }
    if args.lambdas is not None:
        overrides["lambda_grid"] = _parse_list(args.lambdas, float)
    if args.seeds is not None:
        overrides["seeds"] = _parse_list(args.seeds, int)
    raw.update({k: v for k, v in overrides.items() if v is not None})

    config, problems = validate_config_dict(raw)
    if problems:
        for problem in problems:
            print(problem, file=sys.stderr)
        return 1
    try:
        points = run_few_shot(config) if config.few_shot else run_sweep(config)
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for problem in exc.problems:
            print(problem, file=sys.stderr)
        return 1
    failures = sum(1 for p in points if p.error)
    print(f"wrote {config.out} ({len(points)} rows, {failures} tagged failures)")
    return 3 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
