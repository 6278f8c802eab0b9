"""Writer for the EMC1 embedding-dataset wire format.

This package talks to the learner only through its external interfaces,
so the byte format is implemented here against its published layout
(little-endian): magic "EMC1", u16 version=1, u32 d, u32 m,
u64 train_count, u64 test_count, then train records followed by test
records, each record d float32 plus a u16 label.  A JSON sidecar
``<path>.meta.json`` carries provenance.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMC1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQQ")


class ExportError(Exception):
    pass


def _record_block(Z, labels, d):
    Z = np.ascontiguousarray(Z, dtype=np.float32)
    labels = np.asarray(labels)
    if Z.ndim != 2 or Z.shape[1] != d or labels.shape != (Z.shape[0],):
        raise ExportError(f"bad split shapes: {Z.shape} vs {labels.shape}")
    if not np.isfinite(Z).all():
        raise ExportError("non-finite embedding component")
    if Z.shape[0] and (np.linalg.norm(Z.astype(np.float64), axis=1) == 0).any():
        raise ExportError("zero embedding vector")
    rec = np.dtype([("z", "<f4", (d,)), ("label", "<u2")])
    out = np.empty(Z.shape[0], dtype=rec)
    out["z"] = Z
    out["label"] = labels.astype(np.uint16)
    return out.tobytes()


def write_embeddings(path, d, m, train_z, train_labels, test_z, test_labels,
                     source, meta=None, class_names=None):
    """Write one EMC1 file plus its JSON sidecar."""
    for labels in (train_labels, test_labels):
        arr = np.asarray(labels)
        if arr.size and (arr.min() < 0 or arr.max() >= m):
            raise ExportError(f"label outside [0, {m})")
    if m > 0xFFFF:
        raise ExportError(f"class count {m} exceeds the u16 label range")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, d, m, len(train_labels),
                              len(test_labels)))
        fh.write(_record_block(train_z, train_labels, d))
        fh.write(_record_block(test_z, test_labels, d))
    sidecar = {
        "schema": 1,
        "source": source,
        "d": int(d),
        "m": int(m),
        "train_count": int(len(train_labels)),
        "test_count": int(len(test_labels)),
        "class_names": class_names,
        "params": meta or {},
    }
    Path(f"{path}.meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
    return path
