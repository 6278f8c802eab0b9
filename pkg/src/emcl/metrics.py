"""Accuracy tracking and the generalised forgetting metric.

A run record stores the full-test-set evaluation series: at each
recorded batch t, the overall accuracy and the per-class accuracies
a^i_t.  Generalised forgetting is the mean, over classes, of the peak
drop from any recorded accuracy to the final one:

    (1/m) * sum_i max_t (a^i_t - a^i_n)

which is always >= 0 because t ranges over the recorded points
including the final one.  All accuracies are single-head: computed over
the complete label set, never per-task subsets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

_FLOAT_FMT = ".6g"


def round6(x) -> float:
    """Floats are emitted with six significant digits everywhere."""
    return float(format(float(x), _FLOAT_FMT))


@dataclass(frozen=True)
class EvalPoint:
    batch: int
    overall: float
    per_class: np.ndarray


@dataclass(frozen=True, eq=False)
class RunRecord:
    eval_points: tuple[EvalPoint, ...]
    seed: int
    config_hash: str

    @property
    def m(self) -> int:
        return self.eval_points[-1].per_class.size

    @property
    def final_accuracy(self) -> float:
        return self.eval_points[-1].overall

    @property
    def final_per_class(self) -> np.ndarray:
        return self.eval_points[-1].per_class

    def per_class_matrix(self) -> np.ndarray:
        """(T, m) matrix of the recorded per-class accuracy series."""
        return np.stack([p.per_class for p in self.eval_points])

    def batches(self) -> np.ndarray:
        return np.array([p.batch for p in self.eval_points], np.int64)

    def validate(self, total_batches=None) -> None:
        if not self.eval_points:
            raise ConfigError("run record has no evaluation points")
        t = self.batches()
        if (np.diff(t) <= 0).any():
            raise ConfigError("evaluation points must be strictly increasing")
        A = self.per_class_matrix()
        overall = np.array([p.overall for p in self.eval_points])
        if (A < 0).any() or (A > 1).any() or (overall < 0).any() or (overall > 1).any():
            raise ConfigError("accuracies must lie in [0, 1]")
        if total_batches is not None and t[-1] != total_batches:
            raise ConfigError(
                f"last evaluation at batch {t[-1]}, expected {total_batches}"
            )


def accuracy(preds, labels) -> float:
    """Fraction of exact matches over the full label set."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.ndim != 1 or preds.size == 0:
        raise ConfigError(
            f"predictions and labels must be equal-length and nonempty, "
            f"got {preds.shape} vs {labels.shape}"
        )
    return float(np.mean(preds == labels))


def per_class_accuracy(preds, labels, m) -> np.ndarray:
    """Accuracy per class; every class must appear in labels."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    totals = np.bincount(labels, minlength=m)
    if (totals == 0).any():
        raise ConfigError(
            f"class {int(np.argmin(totals > 0))} missing from evaluation labels"
        )
    hits = np.bincount(labels[preds == labels], minlength=m)
    return hits / totals


def generalised_forgetting(rec: RunRecord) -> float:
    """Mean over classes of the peak-to-final accuracy drop."""
    rec.validate()
    A = rec.per_class_matrix()
    return float(np.mean(A.max(axis=0) - A[-1]))


def task_wise_forgetting(rec: RunRecord, class_to_task) -> float:
    """Forgetting over task accuracies (mean of the member classes'
    accuracies) on the same evaluation grid; for equal-size tasks this
    is bounded above by generalised forgetting."""
    rec.validate()
    class_to_task = np.asarray(class_to_task)
    if class_to_task.shape != (rec.m,):
        raise ConfigError("class_to_task must assign every class to a task")
    A = rec.per_class_matrix()
    drops = []
    for task in np.unique(class_to_task):
        series = A[:, class_to_task == task].mean(axis=1)
        drops.append(series.max() - series[-1])
    return float(np.mean(drops))


def summarize(rec: RunRecord) -> dict:
    return {
        "schema": 1,
        "seed": rec.seed,
        "config_hash": rec.config_hash,
        "batches": int(rec.batches()[-1]),
        "eval_points": len(rec.eval_points),
        "final_accuracy": round6(rec.final_accuracy),
        "final_per_class_mean": round6(float(rec.final_per_class.mean())),
        "forgetting": round6(generalised_forgetting(rec)),
    }


def emit_run(rec: RunRecord, out_dir, name: str):
    """Write the eval series as CSV plus a JSON summary; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = rec.m
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write("batch,overall," + ",".join(f"acc_{c}" for c in range(m)) + "\n")
        for p in rec.eval_points:
            cells = [str(p.batch), format(p.overall, _FLOAT_FMT)]
            cells += [format(a, _FLOAT_FMT) for a in p.per_class]
            fh.write(",".join(cells) + "\n")
    json_path = out_dir / f"{name}.json"
    json_path.write_text(json.dumps(summarize(rec), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_run_csv(path):
    """Parse an emitted run CSV back into (batches, overall, per_class)."""
    rows = Path(path).read_text().strip().split("\n")
    header = rows[0].split(",")
    if header[:2] != ["batch", "overall"]:
        raise ConfigError(f"not a run CSV: {path}")
    body = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return body[:, 0].astype(np.int64), body[:, 1], body[:, 2:]


def aggregate_summaries(summaries: list[dict]) -> dict:
    """Mean and standard deviation per metric over runs (population std,
    so a single run reports 0)."""
    if not summaries:
        raise ConfigError("nothing to aggregate")
    hashes = {s["config_hash"] for s in summaries}
    if len(hashes) != 1:
        raise ConfigError(f"mixed configurations in aggregate: {sorted(hashes)}")
    out = {"schema": 1, "runs": len(summaries), "config_hash": hashes.pop()}
    for key in ("final_accuracy", "forgetting"):
        vals = np.array([s[key] for s in summaries], np.float64)
        out[key] = {
            "mean": round6(vals.mean()),
            "std": round6(vals.std(ddof=0)),
        }
    return out
