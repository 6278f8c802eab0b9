"""Command-line front end.

Subcommands:

* ``synth``    -- generate a synthetic clustered-embedding dataset file
* ``run``      -- execute a multi-run experiment from a config and/or flags
* ``inspect``  -- print an embedding file's header and per-class counts
* ``report``   -- aggregate the run summaries found in a directory

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
error.  Run configs are YAML documents with a schema version; flags
override file values.  EMCL_OUTPUT_ROOT sets the default output root.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from .data import SyntheticSpec, generate_synthetic, read_dataset, write_dataset
from .errors import ConfigError, DataError, EmclError, NumericError
from .harness import (
    MODEL_KINDS,
    ExperimentConfig,
    config_hash,
    run_experiment,
)
from .metrics import aggregate_summaries
from .schedules import KINDS as SCHEDULE_KINDS

_SYNTH_KEYS = {f.name for f in fields(SyntheticSpec)}
_MODEL_KEYS = {"kind", "n", "k", "tau", "lr", "decay", "init_scale", "decay_biases"}
_SCHED_KEYS = {"kind", "subsets", "batches", "batch_size", "height", "width"}
_TOP_KEYS = {
    "schema",
    "dataset",
    "model",
    "schedule",
    "eval_every",
    "runs",
    "seed",
    "out",
    "dump_activations",
    "allow_multi_epoch",
}


def _reject_unknown(section, allowed, where):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_config_file(path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    _reject_unknown(doc, _TOP_KEYS, "config")
    if doc.get("schema", 1) != 1:
        raise ConfigError(f"unsupported config schema {doc.get('schema')!r}")
    cfg = ExperimentConfig()
    ds = doc.get("dataset")
    if ds is not None:
        _reject_unknown(ds, {"path", "synthetic"}, "dataset")
        if "path" in ds and "synthetic" in ds:
            raise ConfigError("dataset: give either a path or a synthetic spec")
        if "path" in ds:
            cfg.dataset = str(ds["path"])
        elif "synthetic" in ds:
            _reject_unknown(ds["synthetic"], _SYNTH_KEYS, "dataset.synthetic")
            cfg.dataset = SyntheticSpec(**ds["synthetic"])
    model = doc.get("model") or {}
    _reject_unknown(model, _MODEL_KEYS, "model")
    cfg.model = model.get("kind", cfg.model)
    for key in ("n", "k"):
        if key in model:
            setattr(cfg, key, int(model[key]))
    for key in ("tau", "lr", "decay"):
        if key in model:
            setattr(cfg, key, float(model[key]))
    if model.get("init_scale") is not None:
        cfg.init_scale = float(model["init_scale"])
    if "decay_biases" in model:
        cfg.decay_biases = bool(model["decay_biases"])
    sched = doc.get("schedule") or {}
    _reject_unknown(sched, _SCHED_KEYS, "schedule")
    cfg.schedule = sched.get("kind", cfg.schedule)
    if "subsets" in sched:
        cfg.subsets = None if sched["subsets"] is None else int(sched["subsets"])
    if "batches" in sched:
        cfg.batches = int(sched["batches"])
    if "batch_size" in sched:
        cfg.batch_size = int(sched["batch_size"])
    if "height" in sched:
        cfg.gauss_height = float(sched["height"])
    if "width" in sched:
        cfg.gauss_width = float(sched["width"])
    for key in ("eval_every", "runs", "seed"):
        if key in doc:
            setattr(cfg, key, int(doc[key]))
    if doc.get("out") is not None:
        cfg.out = str(doc["out"])
    for key in ("dump_activations", "allow_multi_epoch"):
        if key in doc:
            setattr(cfg, key, bool(doc[key]))
    return cfg


def parse_schedule_flag(text):
    """'split5' -> ('split', 5); other kinds take no subset count."""
    m = re.fullmatch(r"split(\d+)", text)
    if m:
        return "split", int(m.group(1))
    if text in SCHEDULE_KINDS and text != "split":
        return text, None
    raise ConfigError(
        f"bad schedule {text!r}: expected split<N>, incremental, gaussian or iid"
    )


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.schedule is not None:
        cfg.schedule, subsets = parse_schedule_flag(args.schedule)
        cfg.subsets = subsets
    if args.model is not None:
        cfg.model = args.model
    for flag, attr in (
        ("ensemble_size", "n"),
        ("k", "k"),
        ("tau", "tau"),
        ("lr", "lr"),
        ("decay", "decay"),
        ("eval_every", "eval_every"),
        ("batches", "batches"),
        ("batch_size", "batch_size"),
        ("runs", "runs"),
        ("seed", "seed"),
        ("out", "out"),
    ):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def default_out(cfg: ExperimentConfig) -> str:
    root = os.environ.get("EMCL_OUTPUT_ROOT", "runs")
    return str(Path(root) / f"run-{config_hash(cfg)[:12]}")


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        d=args.dim,
        m=args.classes,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        cluster_spread=args.spread,
        center_norm=args.center_norm,
        overlap=args.overlap,
        seed=args.seed,
    )
    ds = generate_synthetic(spec)
    write_dataset(ds, args.out)
    print(
        f"wrote {args.out}: d={ds.d} m={ds.m} "
        f"train={ds.train_z.shape[0]} test={ds.test_z.shape[0]}"
    )
    return 0


def cmd_run(args) -> int:
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()
    cfg = apply_overrides(cfg, args)
    if cfg.out is None:
        cfg.out = default_out(cfg)
    records = run_experiment(cfg)
    agg = aggregate_summaries(
        [json.loads((Path(cfg.out) / f"run_{i:03d}.json").read_text())
         for i in range(len(records))]
    )
    print(f"config {agg['config_hash'][:12]} -> {cfg.out} ({agg['runs']} runs)")
    for key in ("final_accuracy", "forgetting"):
        print(f"  {key}: {agg[key]['mean']:.6g} +- {agg[key]['std']:.6g}")
    return 0


def cmd_inspect(args) -> int:
    ds = read_dataset(args.dataset, strict=False)
    train_counts, test_counts = ds.class_counts()
    print(f"{args.dataset}: d={ds.d} m={ds.m} source={ds.source}")
    print(f"train={ds.train_z.shape[0]} test={ds.test_z.shape[0]}")
    print("class,train_count,test_count")
    for c in range(ds.m):
        print(f"{c},{train_counts[c]},{test_counts[c]}")
    for c in range(ds.m):
        for split, counts in (("train", train_counts), ("test", test_counts)):
            if counts[c] == 0:
                print(
                    f"warning: class {c} has no {split} examples", file=sys.stderr
                )
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    paths = sorted(run_dir.glob("run_*.json"))
    if not paths:
        raise DataError(f"no run summaries found in {run_dir}")
    agg = aggregate_summaries([json.loads(p.read_text()) for p in paths])
    print(f"{run_dir}: {agg['runs']} runs, config {agg['config_hash'][:12]}")
    for key in ("final_accuracy", "forgetting"):
        print(f"  {key}: {agg[key]['mean']:.6g} +- {agg[key]['std']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emcl",
        description="Online task-free continual learning with an "
        "ensemble memory over frozen embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--dim", type=int, default=64, help="embedding dimension")
    p.add_argument("--classes", type=int, default=10, help="number of classes")
    p.add_argument("--train-per-class", type=int, default=1000)
    p.add_argument("--test-per-class", type=int, default=100)
    p.add_argument("--spread", type=float, default=0.3,
                   help="within-class deviation norm")
    p.add_argument("--center-norm", type=float, default=1.0)
    p.add_argument("--overlap", type=float, default=0.0,
                   help="fraction of classes with correlated centers")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run a training experiment")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--out", help="output directory (default: "
                   "$EMCL_OUTPUT_ROOT/run-<confighash>)")
    p.add_argument("--seed", type=int, help="base seed (run r uses seed+r)")
    p.add_argument("--runs", type=int, help="number of runs")
    p.add_argument("--schedule",
                   help="split<N>, incremental, gaussian or iid")
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--ensemble-size", dest="ensemble_size", type=int,
                   help="number of classifiers in the ensemble")
    p.add_argument("--k", type=int, help="top-k selection size")
    p.add_argument("--tau", type=float, help="tanh scaling factor")
    p.add_argument("--lr", type=float, help="learning rate (sign step size)")
    p.add_argument("--decay", type=float, help="weight decay factor")
    p.add_argument("--eval-every", dest="eval_every", type=int,
                   help="test-set evaluation cadence in batches")
    p.add_argument("--batches", type=int, help="total training batches")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inspect", help="print dataset header and class counts")
    p.add_argument("dataset", help="EMC1 dataset path")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("report", help="aggregate run summaries in a directory")
    p.add_argument("run_dir", help="directory holding run_*.json summaries")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except EmclError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
