"""Embedding dataset persistence and synthetic generation.

On-disk format (little-endian), magic "EMC1":

    magic       4 bytes
    version     u16 (currently 1)
    d           u32   embedding dimension
    m           u32   class count
    train_count u64
    test_count  u64
    records     train then test; each record = d float32 + u16 label

A JSON sidecar ``<path>.meta.json`` carries provenance (source string,
creation parameters, optional class names).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MAGIC = b"EMC1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQQ")


@dataclass(eq=False)
class EmbeddingDataset:
    d: int
    m: int
    train_z: np.ndarray
    train_labels: np.ndarray
    test_z: np.ndarray
    test_labels: np.ndarray
    source: str = "unknown"
    class_names: list[str] | None = None
    meta: dict = field(default_factory=dict)
    _pools: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.train_z = np.ascontiguousarray(self.train_z, dtype=np.float32)
        self.test_z = np.ascontiguousarray(self.test_z, dtype=np.float32)
        self.train_labels = np.ascontiguousarray(self.train_labels, dtype=np.int64)
        self.test_labels = np.ascontiguousarray(self.test_labels, dtype=np.int64)

    def validate(self, strict=True) -> None:
        if self.d < 1 or self.m < 1:
            raise DataError(f"bad dimensions: d={self.d}, m={self.m}")
        if self.m > 0xFFFF:
            raise DataError(f"class count {self.m} exceeds the u16 label range")
        for name, Z, labels in (
            ("train", self.train_z, self.train_labels),
            ("test", self.test_z, self.test_labels),
        ):
            if Z.ndim != 2 or Z.shape[1] != self.d or labels.shape != (Z.shape[0],):
                raise DataError(f"{name} split shapes are inconsistent")
            if not np.isfinite(Z).all():
                raise DataError(f"{name} split contains non-finite components")
            if Z.shape[0] and (np.linalg.norm(Z, axis=1) == 0.0).any():
                raise DataError(f"{name} split contains a zero vector")
            if labels.size and (labels.min() < 0 or labels.max() >= self.m):
                raise DataError(f"{name} split has labels outside [0, {self.m})")
        if strict:
            for name, labels in (
                ("train", self.train_labels),
                ("test", self.test_labels),
            ):
                present = np.bincount(labels, minlength=self.m) > 0
                if not present.all():
                    missing = int(np.argmin(present))
                    raise DataError(
                        f"class {missing} has no examples in the {name} split"
                    )

    def train_indices_by_class(self):
        if self._pools is None:
            self._pools = tuple(
                np.flatnonzero(self.train_labels == c) for c in range(self.m)
            )
        return self._pools

    def class_counts(self):
        return (
            np.bincount(self.train_labels, minlength=self.m),
            np.bincount(self.test_labels, minlength=self.m),
        )


def _record_dtype(d):
    return np.dtype([("z", "<f4", (d,)), ("label", "<u2")])


def write_dataset(ds: EmbeddingDataset, path) -> None:
    ds.validate(strict=False)
    path = Path(path)
    rec = _record_dtype(ds.d)
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, VERSION, ds.d, ds.m, ds.train_z.shape[0], ds.test_z.shape[0]
            )
        )
        for Z, labels in ((ds.train_z, ds.train_labels), (ds.test_z, ds.test_labels)):
            out = np.empty(Z.shape[0], dtype=rec)
            out["z"] = Z
            out["label"] = labels.astype(np.uint16)
            fh.write(out.tobytes())
    sidecar = {
        "schema": 1,
        "source": ds.source,
        "d": ds.d,
        "m": ds.m,
        "train_count": int(ds.train_z.shape[0]),
        "test_count": int(ds.test_z.shape[0]),
        "class_names": ds.class_names,
        "params": ds.meta,
    }
    Path(f"{path}.meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )


def _check_record_payload(Z, labels, m, d, base_offset, split):
    rec_size = 4 * d + 2
    bad = labels >= m
    if bad.any():
        r = int(np.argmax(bad))
        raise DataError(
            f"label {int(labels[r])} >= m={m} in {split} record {r} "
            f"(byte offset {base_offset + r * rec_size + 4 * d})"
        )
    finite = np.isfinite(Z)
    if not finite.all():
        r, comp = np.argwhere(~finite)[0]
        raise DataError(
            f"non-finite component in {split} record {int(r)} "
            f"(byte offset {base_offset + int(r) * rec_size + 4 * int(comp)})"
        )
    norms = np.linalg.norm(Z.astype(np.float64), axis=1)
    if (norms == 0.0).any():
        r = int(np.argmax(norms == 0.0))
        raise DataError(
            f"zero vector in {split} record {r} "
            f"(byte offset {base_offset + r * rec_size})"
        )


def read_dataset(path, strict=True) -> EmbeddingDataset:
    """Load an EMC1 file, validating every dataset invariant.

    strict=False skips the requirement that every class appear in both
    splits (used by `inspect`, which only warns).
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(
            f"truncated header: {len(blob)} bytes < {_HEADER.size} (byte offset 0)"
        )
    magic, version, d, m, n_train, n_test = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r} (byte offset 0), expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"unsupported format version {version} (byte offset 4)")
    if d < 1 or m < 1:
        raise DataError(f"bad header: d={d}, m={m}")
    rec_size = 4 * d + 2
    expected = _HEADER.size + (n_train + n_test) * rec_size
    if len(blob) < expected:
        complete = max(0, (len(blob) - _HEADER.size) // rec_size)
        raise DataError(
            f"truncated file: expected {expected} bytes, got {len(blob)} "
            f"(first incomplete record at byte offset "
            f"{_HEADER.size + complete * rec_size})"
        )
    if len(blob) > expected:
        raise DataError(
            f"trailing bytes: expected {expected} bytes, got {len(blob)} "
            f"(unexpected data at byte offset {expected})"
        )
    records = np.frombuffer(blob, dtype=_record_dtype(d), count=n_train + n_test,
                            offset=_HEADER.size)
    train, test = records[:n_train], records[n_train:]
    _check_record_payload(train["z"], train["label"], m, d, _HEADER.size, "train")
    _check_record_payload(
        test["z"], test["label"], m, d, _HEADER.size + n_train * rec_size, "test"
    )
    source, class_names, meta = "unknown", None, {}
    sidecar = Path(f"{path}.meta.json")
    if sidecar.exists():
        info = json.loads(sidecar.read_text())
        source = info.get("source", source)
        class_names = info.get("class_names")
        meta = info.get("params") or {}
    ds = EmbeddingDataset(
        d=d,
        m=m,
        train_z=train["z"].copy(),
        train_labels=train["label"].astype(np.int64),
        test_z=test["z"].copy(),
        test_labels=test["label"].astype(np.int64),
        source=source,
        class_names=class_names,
        meta=meta,
    )
    ds.validate(strict=strict)
    return ds


@dataclass(frozen=True)
class SyntheticSpec:
    """Clustered Gaussian embeddings standing in for a frozen encoder.

    cluster_spread is the typical within-class deviation norm: per-axis
    noise std is cluster_spread/sqrt(d), so E||z - center|| is about
    cluster_spread regardless of dimension.
    """

    d: int = 64
    m: int = 10
    train_per_class: int = 1000
    test_per_class: int = 100
    cluster_spread: float = 0.3
    center_norm: float = 1.0
    overlap: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.d < 1 or self.m < 1:
            raise ConfigError(f"d and m must be >= 1, got d={self.d}, m={self.m}")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ConfigError("per-class counts must be >= 1")
        if self.cluster_spread <= 0 or self.center_norm <= 0:
            raise ConfigError("cluster_spread and center_norm must be > 0")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError(f"overlap must lie in [0, 1], got {self.overlap}")


def generate_synthetic(spec: SyntheticSpec) -> EmbeddingDataset:
    """Class clusters on a sphere: center i has norm center_norm, and
    samples scatter isotropically around it.  A nonzero overlap fraction
    makes the trailing classes' centers correlate with a shared anchor
    direction (harder to separate)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    centers = np.empty((spec.m, spec.d))
    anchor = rng.standard_normal(spec.d)
    anchor /= np.linalg.norm(anchor)
    n_corr = int(round(spec.overlap * spec.m))
    for c in range(spec.m):
        g = rng.standard_normal(spec.d)
        g /= np.linalg.norm(g)
        if c >= spec.m - n_corr:
            # pairwise cosine between correlated centers is about 0.8
            g = 2.0 * anchor + g
            g /= np.linalg.norm(g)
        centers[c] = spec.center_norm * g
    noise_std = spec.cluster_spread / np.sqrt(spec.d)

    def draw(per_class):
        labels = np.repeat(np.arange(spec.m), per_class)
        Z = centers[labels] + noise_std * rng.standard_normal(
            (labels.size, spec.d)
        )
        return Z.astype(np.float32), labels

    train_z, train_labels = draw(spec.train_per_class)
    test_z, test_labels = draw(spec.test_per_class)
    return EmbeddingDataset(
        d=spec.d,
        m=spec.m,
        train_z=train_z,
        train_labels=train_labels,
        test_z=test_z,
        test_labels=test_labels,
        source="synthetic",
        meta=asdict(spec),
    )
