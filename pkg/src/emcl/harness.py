"""Experiment orchestration: online, single-pass training runs.

One run wires schedule -> model -> sign optimizer -> metrics: batches
are sampled from the schedule's drifting class distribution, the model
takes one sign-update per batch, and the full held-out test set is
evaluated on a fixed cadence (plus at every task boundary and at the
final batch).  Multi-run experiments derive per-run seeds as
base_seed + run_index, and every artifact is byte-deterministic for a
given (config, seed).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from hashlib import sha256
from pathlib import Path

import numpy as np

from .baselines import TanhBaseline, VanillaBaseline
from .data import EmbeddingDataset, SyntheticSpec, generate_synthetic, read_dataset
from .errors import ConfigError
from .metrics import (
    EvalPoint,
    RunRecord,
    accuracy,
    aggregate_summaries,
    emit_run,
    per_class_accuracy,
    summarize,
)
from .model import SAMPLER_STREAM, EnsembleMemory, Hyperparams
from .schedules import make_schedule, sample_batch, task_boundaries

MODEL_KINDS = ("ensemble", "tanh", "vanilla")

# baselines benefit from a larger init scale than ensemble members
DEFAULT_INIT_SCALE = {"ensemble": 1.0, "tanh": 10.0, "vanilla": 10.0}

_EVAL_CHUNK = 4096


@dataclass
class ExperimentConfig:
    dataset: SyntheticSpec | str = field(default_factory=SyntheticSpec)
    model: str = "ensemble"
    n: int = 1024
    k: int = 32
    tau: float = 250.0
    lr: float = 1e-4
    decay: float = 1e-4
    init_scale: float | None = None  # None -> per-model default
    decay_biases: bool = True
    schedule: str = "split"
    subsets: int | None = 5
    batches: int = 1000
    batch_size: int = 10
    gauss_height: float = 1.0
    gauss_width: float = 50.0
    eval_every: int = 10
    runs: int = 20
    seed: int = 0
    out: str | None = None
    dump_activations: bool = False
    allow_multi_epoch: bool = False

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(
                f"model must be one of {MODEL_KINDS}, got {self.model!r}"
            )
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")

    def resolved_init_scale(self) -> float:
        if self.init_scale is not None:
            return self.init_scale
        return DEFAULT_INIT_SCALE[self.model]


def config_dict(cfg: ExperimentConfig) -> dict:
    """Canonical resolved form of a config (what gets hashed/echoed)."""
    cfg.validate()
    if isinstance(cfg.dataset, SyntheticSpec):
        dataset = {"synthetic": asdict(cfg.dataset)}
    else:
        dataset = {"path": str(cfg.dataset)}
    return {
        "schema": 1,
        "dataset": dataset,
        "model": {
            "kind": cfg.model,
            "n": cfg.n,
            "k": cfg.k,
            "tau": cfg.tau,
            "lr": cfg.lr,
            "decay": cfg.decay,
            "init_scale": cfg.resolved_init_scale(),
            "decay_biases": cfg.decay_biases,
        },
        "schedule": {
            "kind": cfg.schedule,
            "subsets": cfg.subsets,
            "batches": cfg.batches,
            "batch_size": cfg.batch_size,
            "height": cfg.gauss_height,
            "width": cfg.gauss_width,
        },
        "eval_every": cfg.eval_every,
        "runs": cfg.runs,
        "seed": cfg.seed,
    }


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True).encode()
    return sha256(blob).hexdigest()


def load_dataset(cfg: ExperimentConfig) -> EmbeddingDataset:
    if isinstance(cfg.dataset, SyntheticSpec):
        return generate_synthetic(cfg.dataset)
    return read_dataset(cfg.dataset)


def build_model(cfg: ExperimentConfig, d: int, m: int, seed: int):
    hp = Hyperparams(
        d=d,
        m=m,
        n=cfg.n,
        k=cfg.k,
        tau=cfg.tau,
        lr=cfg.lr,
        decay=cfg.decay,
        seed=seed,
        init_scale=cfg.resolved_init_scale(),
        decay_biases=cfg.decay_biases,
    )
    if cfg.model == "ensemble":
        return EnsembleMemory(hp)
    if cfg.model == "tanh":
        return TanhBaseline(hp)
    return VanillaBaseline(hp)


def _predict_chunks(model, Z):
    preds = np.empty(Z.shape[0], np.int64)
    for lo in range(0, Z.shape[0], _EVAL_CHUNK):
        hi = min(lo + _EVAL_CHUNK, Z.shape[0])
        preds[lo:hi] = model.predict_batch(Z[lo:hi])
    return preds


def eval_batches(cfg: ExperimentConfig, sched) -> list[int]:
    """Batch indices after which the test set is evaluated: the fixed
    cadence, every task boundary, and the final batch."""
    marks = {b for b in range(cfg.batches) if (b + 1) % cfg.eval_every == 0}
    marks.update(task_boundaries(sched))
    marks.add(cfg.batches - 1)
    return sorted(marks)


def run_single(cfg: ExperimentConfig, dataset: EmbeddingDataset, seed: int):
    """One training run; returns (RunRecord, activation dumps or None)."""
    sched = make_schedule(
        cfg.schedule,
        dataset.m,
        cfg.batches,
        cfg.batch_size,
        seed,
        subsets=cfg.subsets,
        height=cfg.gauss_height,
        width=cfg.gauss_width,
    )
    model = build_model(cfg, dataset.d, dataset.m, seed)
    rng = np.random.default_rng([seed, SAMPLER_STREAM])
    Ztest = np.ascontiguousarray(dataset.test_z, dtype=np.float64)
    ytest = dataset.test_labels
    marks = set(eval_batches(cfg, sched))
    probes = None
    dumps = [] if cfg.dump_activations else None
    if cfg.dump_activations:
        first = [np.flatnonzero(ytest == c)[0] for c in range(dataset.m)]
        probes = Ztest[np.array(first)]
    points = []
    for B in range(cfg.batches):
        Z, labels = sample_batch(sched, B, dataset, rng)
        try:
            model.train_step(Z, labels)
        except Exception as exc:
            raise type(exc)(f"batch {B}: {exc}") from exc
        if B in marks:
            preds = _predict_chunks(model, Ztest)
            points.append(
                EvalPoint(
                    batch=B + 1,
                    overall=accuracy(preds, ytest),
                    per_class=per_class_accuracy(preds, ytest, dataset.m),
                )
            )
            if dumps is not None:
                dumps.append(model.scores_batch(probes))
    model.check_finite()
    rec = RunRecord(
        eval_points=tuple(points), seed=seed, config_hash=config_hash(cfg)
    )
    rec.validate(total_batches=cfg.batches)
    return rec, (np.stack(dumps) if dumps else None)


def run_experiment(cfg: ExperimentConfig, dataset=None) -> list[RunRecord]:
    """Run cfg.runs seeds; writes artifacts when cfg.out is set."""
    cfg.validate()
    if dataset is None:
        dataset = load_dataset(cfg)
    consumed = cfg.batches * cfg.batch_size
    train_size = dataset.train_z.shape[0]
    if consumed > train_size:
        msg = (
            f"run consumes {consumed} examples but one epoch of the training "
            f"split is only {train_size}"
        )
        if not cfg.allow_multi_epoch:
            raise ConfigError(msg + " (set allow_multi_epoch to override)")
        warnings.warn(msg)
    out = Path(cfg.out) if cfg.out else None
    records = []
    for r in range(cfg.runs):
        seed = cfg.seed + r
        rec, dumps = run_single(cfg, dataset, seed)
        records.append(rec)
        if out is not None:
            emit_run(rec, out, f"run_{r:03d}")
            if dumps is not None:
                np.save(out / f"run_{r:03d}.activations.npy", dumps)
    if out is not None:
        agg = aggregate_summaries([summarize(r) for r in records])
        (out / "aggregate.json").write_text(
            json.dumps(agg, indent=2, sort_keys=True) + "\n"
        )
        echo = dict(config_dict(cfg))
        echo["config_hash"] = config_hash(cfg)
        (out / "config.json").write_text(
            json.dumps(echo, indent=2, sort_keys=True) + "\n"
        )
    return records


def ablation_sweep(cfg: ExperimentConfig, axis: str, values) -> list[dict]:
    """Re-run the experiment while varying the ensemble size or k.

    Returns one row per setting with the mean/std of final accuracy
    over the sweep's runs; rows carry an accuracy rank (1 = best mean).
    """
    if axis not in ("n", "k"):
        raise ConfigError(f"sweep axis must be 'n' or 'k', got {axis!r}")
    if cfg.model != "ensemble":
        raise ConfigError("ablation sweeps apply to the ensemble model")
    rows = []
    for value in values:
        sub = replace(cfg, out=None, **{axis: int(value)})
        records = run_experiment(sub)
        finals = np.array([r.final_accuracy for r in records])
        rows.append(
            {
                "axis": axis,
                "value": int(value),
                "mean_final_accuracy": float(finals.mean()),
                "std_final_accuracy": float(finals.std(ddof=0)),
                "per_seed": [float(a) for a in finals],
            }
        )
    order = np.argsort([-r["mean_final_accuracy"] for r in rows], kind="stable")
    for rank, i in enumerate(order, start=1):
        rows[i]["rank"] = rank
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"sweep_{axis}.csv", "w", newline="") as fh:
            fh.write(f"{axis},mean_final_accuracy,std_final_accuracy,rank\n")
            for r in rows:
                fh.write(
                    f"{r['value']},{r['mean_final_accuracy']:.6g},"
                    f"{r['std_final_accuracy']:.6g},{r['rank']}\n"
                )
    return rows
