"""Image sources: torchvision datasets from local roots, plus a
procedural glyph generator used by tests and demos when no image data
is available.  Images are float32 arrays in [0, 1]."""

from __future__ import annotations

import numpy as np

from .emc_format import ExportError

IMG = 28


class DataUnavailable(ExportError):
    """Requested image dataset is not present locally."""


def synthetic_glyphs(m, per_class, seed, img=IMG):
    """Stroke-like 28x28 glyphs: each class is a fixed set of line
    segments, each sample a jittered rendering.  Returns (images
    (N, img, img) float32 in [0,1], labels (N,) int64)."""
    rng = np.random.default_rng(seed)
    prototypes = []
    for _ in range(m):
        segs = rng.integers(3, 6)
        pts = rng.uniform(4, img - 4, size=(segs, 4))
        prototypes.append(pts)
    images = np.zeros((m * per_class, img, img), np.float32)
    labels = np.repeat(np.arange(m), per_class)
    t = np.linspace(0.0, 1.0, 40)

    def blur3(a):
        padded = np.pad(a, 1)
        return sum(
            padded[di : di + img, dj : dj + img]
            for di in range(3)
            for dj in range(3)
        ) / 9.0

    for i, c in enumerate(labels):
        canvas = np.zeros((img, img), np.float32)
        jitter = rng.normal(0.0, 0.5, size=prototypes[c].shape)
        for x0, y0, x1, y1 in prototypes[c] + jitter:
            xs = np.clip(np.round(x0 + (x1 - x0) * t).astype(int), 0, img - 1)
            ys = np.clip(np.round(y0 + (y1 - y0) * t).astype(int), 0, img - 1)
            canvas[ys, xs] = 1.0
        # double 3x3 smoothing: soft, wide strokes like downsampled pen
        # drawings rather than 1-pixel hairlines
        images[i] = np.clip(3.0 * blur3(blur3(canvas)), 0.0, 1.0)
    return images, labels.astype(np.int64)


def _torchvision():
    try:
        import torchvision  # noqa: F401
        from torchvision import datasets, transforms
    except ImportError as exc:
        raise DataUnavailable(f"torchvision is not installed: {exc}")
    return datasets, transforms


def load_omniglot(root, invert=True):
    """Omniglot background set as 28x28 float arrays (glyphs bright on
    dark when invert=True, matching digit polarity)."""
    datasets, transforms = _torchvision()
    tf = transforms.Compose(
        [transforms.Resize((IMG, IMG)), transforms.ToTensor()]
    )
    try:
        ds = datasets.Omniglot(root, background=True, download=False, transform=tf)
    except (RuntimeError, FileNotFoundError) as exc:
        raise DataUnavailable(f"Omniglot not found under {root}: {exc}")
    images = np.stack([ds[i][0].numpy()[0] for i in range(len(ds))])
    if invert:
        images = 1.0 - images
    return images.astype(np.float32)


def load_mnist(root):
    """MNIST train/test splits as ((images, labels), (images, labels))."""
    datasets, _ = _torchvision()
    out = []
    for train in (True, False):
        try:
            ds = datasets.MNIST(root, train=train, download=False)
        except (RuntimeError, FileNotFoundError) as exc:
            raise DataUnavailable(f"MNIST not found under {root}: {exc}")
        images = ds.data.numpy().astype(np.float32) / 255.0
        out.append((images, ds.targets.numpy().astype(np.int64)))
    return tuple(out)


def load_cifar(root, classes=10):
    """CIFAR-10/100 train/test splits as float32 NHWC arrays in [0,1]."""
    datasets, _ = _torchvision()
    kind = datasets.CIFAR10 if classes == 10 else datasets.CIFAR100
    out = []
    for train in (True, False):
        try:
            ds = kind(root, train=train, download=False)
        except (RuntimeError, FileNotFoundError) as exc:
            raise DataUnavailable(f"CIFAR-{classes} not found under {root}: {exc}")
        images = ds.data.astype(np.float32) / 255.0
        out.append((images, np.asarray(ds.targets, dtype=np.int64)))
    return tuple(out)
