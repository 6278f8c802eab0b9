"""Non-stationary class schedules for the training stream.

A schedule maps a batch index to a class-sampling distribution:

* ``split``        -- the label set is partitioned into equal subsets
                      presented one after another (hard task boundaries);
* ``incremental``  -- split with singleton subsets (one class at a time);
* ``gaussian``     -- every class's probability follows a bell curve whose
                      peaks are spread evenly over training (no boundaries);
* ``iid``          -- uniform over all classes throughout (control).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import ORDER_STREAM

KINDS = ("split", "incremental", "gaussian", "iid")


@dataclass(frozen=True, eq=False)
class Schedule:
    kind: str
    num_classes: int
    total_batches: int
    batch_size: int
    class_order: np.ndarray
    subsets: int | None = None
    gauss_height: float = 1.0
    gauss_width: float = 50.0
    seed: int = 0

    @property
    def num_tasks(self) -> int:
        return self.subsets if self.subsets is not None else 1

    @property
    def batches_per_task(self) -> int:
        return self.total_batches // self.num_tasks


def make_schedule(
    kind,
    m,
    total_batches,
    batch_size,
    seed,
    subsets=None,
    height=1.0,
    width=50.0,
) -> Schedule:
    if kind not in KINDS:
        raise ConfigError(f"unknown schedule kind {kind!r}, expected one of {KINDS}")
    if m < 1 or total_batches < 1 or batch_size < 1:
        raise ConfigError("m, total_batches and batch_size must all be >= 1")
    if kind in ("gaussian", "iid"):
        subsets = None
    if kind == "incremental":
        subsets = m
    if kind == "split":
        if subsets is None:
            raise ConfigError("split schedule needs a subset count")
        subsets = int(subsets)
        if not 1 <= subsets <= m:
            raise ConfigError(f"subsets must lie in [1, m], got {subsets}")
        if m % subsets != 0:
            raise ConfigError(f"{subsets} subsets do not divide {m} classes evenly")
    if subsets is not None and total_batches % subsets != 0:
        raise ConfigError(
            f"{subsets} tasks do not divide {total_batches} batches evenly"
        )
    if width <= 0 or height <= 0:
        raise ConfigError("gaussian height and width must be > 0")
    order = np.random.default_rng([seed, ORDER_STREAM]).permutation(m)
    return Schedule(
        kind=kind,
        num_classes=m,
        total_batches=total_batches,
        batch_size=batch_size,
        class_order=order,
        subsets=subsets,
        gauss_height=float(height),
        gauss_width=float(width),
        seed=seed,
    )


def class_distribution(sched: Schedule, B: int) -> np.ndarray:
    """Probability of drawing each class at batch B (sums to 1)."""
    if not 0 <= B < sched.total_batches:
        raise ConfigError(
            f"batch index {B} out of range [0, {sched.total_batches})"
        )
    m = sched.num_classes
    probs = np.zeros(m)
    if sched.kind in ("split", "incremental"):
        group = m // sched.subsets
        task = B // sched.batches_per_task
        active = sched.class_order[task * group : (task + 1) * group]
        probs[active] = 1.0 / group
    elif sched.kind == "gaussian":
        # peak of the class at order position i sits at i*total/m, so the
        # m bell curves are spread evenly over the run
        peaks = np.arange(m) * (sched.total_batches / m)
        w = sched.gauss_width
        weights = sched.gauss_height * np.exp(-((B - peaks) ** 2) / (2.0 * w * w))
        probs[sched.class_order] = weights / weights.sum()
    else:  # iid
        probs[:] = 1.0 / m
    return probs


def gaussian_weight(sched: Schedule, position: int, B: int) -> float:
    """Unnormalized bell-curve weight of the class at an order position."""
    if sched.kind != "gaussian":
        raise ConfigError("gaussian_weight only applies to gaussian schedules")
    peak = position * (sched.total_batches / sched.num_classes)
    w = sched.gauss_width
    return float(sched.gauss_height * np.exp(-((B - peak) ** 2) / (2.0 * w * w)))


def sample_batch(sched: Schedule, B: int, dataset, rng):
    """Draw one training batch: classes i.i.d. from the batch distribution,
    then examples uniformly with replacement from each class's train pool.

    Returns (Z, labels) with Z float64 (batch_size, d).
    """
    probs = class_distribution(sched, B)
    classes = rng.choice(sched.num_classes, size=sched.batch_size, p=probs)
    pools = dataset.train_indices_by_class()
    picks = np.empty(sched.batch_size, np.int64)
    for i, c in enumerate(classes):
        pool = pools[int(c)]
        if pool.size == 0:
            raise DataError(
                f"class {int(c)} has positive probability at batch {B} "
                "but no training examples"
            )
        picks[i] = pool[rng.integers(pool.size)]
    Z = np.ascontiguousarray(dataset.train_z[picks], dtype=np.float64)
    return Z, np.ascontiguousarray(classes, dtype=np.int64)


def task_boundaries(sched: Schedule) -> list[int]:
    """Final batch index of every task (empty when there are no tasks)."""
    if sched.subsets is None:
        return []
    per = sched.batches_per_task
    return [(t + 1) * per - 1 for t in range(sched.subsets)]


def describe(sched: Schedule) -> str:
    """Human-readable schedule summary with per-task batch ranges."""
    lines = [
        f"{sched.kind} schedule: {sched.total_batches} batches of "
        f"{sched.batch_size} over {sched.num_classes} classes"
    ]
    if sched.subsets is not None:
        group = sched.num_classes // sched.subsets
        per = sched.batches_per_task
        for t in range(sched.subsets):
            classes = sched.class_order[t * group : (t + 1) * group].tolist()
            lines.append(
                f"  task {t}: batches {t * per}-{(t + 1) * per - 1}, "
                f"classes {classes}"
            )
    elif sched.kind == "gaussian":
        step = sched.total_batches / sched.num_classes
        lines.append(
            f"  class probability peaks every {step:g} batches "
            f"(width {sched.gauss_width:g}), order {sched.class_order.tolist()}"
        )
    else:
        lines.append(
            f"  batches 0-{sched.total_batches - 1}: uniform over all classes"
        )
    return "\n".join(lines)
