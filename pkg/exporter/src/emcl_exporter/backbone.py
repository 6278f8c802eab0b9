"""Frozen convolutional backbone for CIFAR-scale images.

Loads a ResNet-50 trunk (2048-d pooled features), optionally from a
local pretrained checkpoint, and encodes images after bicubic
upsampling to 128x128.  The checkpoint identity is recorded in export
provenance; no pretraining happens here.
"""

from __future__ import annotations

import numpy as np
import torch
from torch.nn import functional as F

from .datasets import DataUnavailable
from .emc_format import ExportError

FEATURE_DIM = 2048
UPSAMPLE = 128

_IMAGENET_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_IMAGENET_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


def load_backbone(checkpoint=None):
    """ResNet-50 with the classifier head removed; weights from the
    checkpoint when given, otherwise the (untrained) default init."""
    try:
        from torchvision.models import resnet50
    except ImportError as exc:
        raise DataUnavailable(f"torchvision is not installed: {exc}")
    model = resnet50(weights=None)
    if checkpoint is not None:
        try:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        except FileNotFoundError as exc:
            raise DataUnavailable(f"checkpoint not found: {exc}")
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        missing, unexpected = model.load_state_dict(state, strict=False)
        trunk_missing = [k for k in missing if not k.startswith("fc.")]
        if trunk_missing:
            raise ExportError(
                f"checkpoint does not cover the trunk (missing {trunk_missing[:4]}...)"
            )
        del unexpected
    model.fc = torch.nn.Identity()
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def encode_cifar_images(model, images, batch_size=64, normalize=True):
    """NHWC [0,1] images -> (N, 2048) float32 features, after bicubic
    upsampling to 128x128."""
    x = torch.as_tensor(np.asarray(images), dtype=torch.float32)
    if x.ndim != 4 or x.shape[-1] != 3:
        raise ExportError(f"expected NHWC color images, got {tuple(x.shape)}")
    x = x.permute(0, 3, 1, 2)
    out = []
    with torch.no_grad():
        for lo in range(0, x.shape[0], batch_size):
            chunk = x[lo : lo + batch_size]
            chunk = F.interpolate(
                chunk, size=(UPSAMPLE, UPSAMPLE), mode="bicubic",
                align_corners=False,
            )
            if normalize:
                chunk = (chunk - _IMAGENET_MEAN) / _IMAGENET_STD
            out.append(model(chunk).numpy().astype(np.float32))
    return (
        np.concatenate(out) if out else np.empty((0, FEATURE_DIM), np.float32)
    )
