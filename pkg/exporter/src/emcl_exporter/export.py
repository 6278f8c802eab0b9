"""Turn images plus a frozen encoder into an EMC1 embedding file."""

from __future__ import annotations

import hashlib

import torch

from .emc_format import write_embeddings


def encoder_fingerprint(module) -> str:
    """SHA-256 over the module's parameters and buffers (sorted by
    name), so provenance pins the exact weights used for an export."""
    digest = hashlib.sha256()
    state = module.state_dict()
    for name in sorted(state):
        digest.update(name.encode())
        digest.update(state[name].numpy().tobytes())
    return digest.hexdigest()


def export_dataset(encode, d, train, test, out_path, source, meta=None,
                   class_names=None):
    """Encode both splits with `encode` and write one EMC1 file.

    train/test are (images, labels) pairs; `encode` maps images to an
    (N, d) float32 array.
    """
    (train_x, train_y), (test_x, test_y) = train, test
    train_z = encode(train_x)
    test_z = encode(test_x)
    m = int(max(train_y.max(), test_y.max())) + 1
    return write_embeddings(
        out_path,
        d=d,
        m=m,
        train_z=train_z,
        train_labels=train_y,
        test_z=test_z,
        test_labels=test_y,
        source=source,
        meta=meta or {},
        class_names=class_names,
    )


def save_encoder(encoder, path, spec_info=None) -> str:
    """Persist encoder weights plus provenance; returns the fingerprint."""
    fp = encoder_fingerprint(encoder)
    torch.save(
        {"state_dict": encoder.state_dict(), "fingerprint": fp,
         "spec": spec_info or {}},
        path,
    )
    return fp


def load_encoder(path):
    from .vae import Encoder

    blob = torch.load(path, map_location="cpu", weights_only=False)
    encoder = Encoder()
    encoder.load_state_dict(blob["state_dict"])
    encoder.eval()
    for p in encoder.parameters():
        p.requires_grad_(False)
    return encoder, blob.get("fingerprint"), blob.get("spec", {})
