"""Key-addressed ensemble of scaled-tanh linear classifiers.

A model is a fixed matrix of random keys plus one trainable linear
classifier per key.  Inference looks up the k keys closest to the input
embedding by cosine similarity, runs their classifiers, and returns the
similarity-weighted average of the outputs.  Training minimizes the
negative dot product between that output and the one-hot label, with a
sign-only optimizer: per batch, each parameter moves by exactly the
learning rate in the direction opposite its summed gradient, plus a
decoupled weight-decay pull toward zero.

The combination of the scaled-tanh activation and the dot-product loss
makes the loss gradient vanish identically for every output row other
than the sample's true class, which is what confines updates and
mitigates forgetting.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr, ndtri

from . import kernels
from .errors import ConfigError, NumericError

# Independent seed streams so that e.g. drawing keys never shifts the
# classifier-weight draws (a 1-member ensemble and a stand-alone
# classifier must initialize identically from the same seed).
KEY_STREAM = 11
INIT_STREAM = 13
ORDER_STREAM = 17
SAMPLER_STREAM = 19


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters; defaults follow the reference configuration."""

    d: int
    m: int
    n: int = 1024
    k: int = 32
    tau: float = 250.0
    lr: float = 1e-4
    decay: float = 1e-4
    seed: int = 0
    init_scale: float = 1.0
    decay_biases: bool = True

    def validate(self) -> None:
        if self.d < 1 or self.m < 1:
            raise ConfigError(f"d and m must be >= 1, got d={self.d}, m={self.m}")
        if self.n < 1:
            raise ConfigError(f"ensemble size must be >= 1, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"k must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.decay < 0:
            raise ConfigError(f"decay must be >= 0, got {self.decay}")
        if self.init_scale <= 0:
            raise ConfigError(f"init_scale must be > 0, got {self.init_scale}")

    def with_(self, **kw) -> "Hyperparams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ModelOutput:
    """Forward-pass result: aggregated scores plus the selected
    classifiers (indices with their cosine similarities, best first)."""

    y_hat: np.ndarray
    indices: np.ndarray
    similarities: np.ndarray


def truncated_normal(rng, shape, std, clip=2.0):
    """Normal truncated at +-clip standard deviations, scaled by std.

    Inverse-CDF sampling: exactly one uniform per entry, so the number
    of draws depends only on the element count and identical streams
    yield identical weights across differently-shaped views.
    """
    lo, hi = ndtr(-clip), ndtr(clip)
    u = rng.random(shape)
    return ndtri(lo + u * (hi - lo)) * std


def as_embedding_batch(Z, d) -> np.ndarray:
    """Validate and convert embeddings to a float64 (N, d) batch."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.ndim != 2 or Z.shape[1] != d:
        raise ConfigError(f"expected embeddings of dimension {d}, got shape {Z.shape}")
    if not np.isfinite(Z).all():
        raise NumericError("embedding contains non-finite components")
    norms = np.linalg.norm(Z, axis=1)
    if (norms == 0.0).any():
        raise NumericError(
            f"zero embedding at row {int(np.argmax(norms == 0.0))}: "
            "cosine similarity is undefined for the zero vector"
        )
    return Z


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two nonzero vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError(f"vectors must share one shape, got {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine similarity is undefined for the zero vector")
    return float(np.dot(a, b) / (na * nb))


def t_forward(W, b, z, tau) -> np.ndarray:
    """Output of a single scaled-tanh classifier: tau*tanh((Wz + b)/tau)."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if W.ndim != 2 or b.shape != (W.shape[0],) or z.shape != (W.shape[1],):
        raise ConfigError(
            f"shape mismatch: W {W.shape}, b {b.shape}, z {z.shape}"
        )
    return tau * np.tanh((W @ z + b) / tau)


def dot_loss(y, y_hat) -> float:
    """Negative dot product of a one-hot label with the model output."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ConfigError(f"label/output shape mismatch: {y.shape} vs {y_hat.shape}")
    if not (np.isin(y, (0.0, 1.0)).all() and y.sum() == 1.0):
        raise ConfigError("label vector must be one-hot")
    return -float(np.dot(y, y_hat))


class EnsembleMemory:
    """The trainable model: n fixed keys paired with n tanh classifiers.

    Keys are sampled once from a standard normal and are immutable for
    the life of the model; classifier weights come from a fan-in
    truncated normal and biases start at zero.
    """

    def __init__(self, hp: Hyperparams):
        hp.validate()
        self.hp = hp
        key_rng = np.random.default_rng([hp.seed, KEY_STREAM])
        init_rng = np.random.default_rng([hp.seed, INIT_STREAM])
        self.keys = key_rng.standard_normal((hp.n, hp.d))
        self.keys.setflags(write=False)
        self._keys_unit = kernels.unit_rows(self.keys)
        self._keys_unit.setflags(write=False)
        self.W = truncated_normal(
            init_rng, (hp.n, hp.m, hp.d), std=hp.init_scale / math.sqrt(hp.d)
        )
        self.b = np.zeros((hp.n, hp.m))
        self._gW = np.zeros_like(self.W)
        self._gb = np.zeros_like(self.b)

    # -- lookup -------------------------------------------------------

    def similarities(self, Z) -> np.ndarray:
        """Cosine similarity of each embedding to every key, (N, n)."""
        Z = as_embedding_batch(Z, self.hp.d)
        return kernels.cosine_matrix(kernels.unit_rows(Z), self._keys_unit)

    def top_k(self, z, k=None):
        """Indices and similarities of the k closest keys, best first.

        Ties are broken toward the lower key index.
        """
        k = self.hp.k if k is None else int(k)
        if not 1 <= k <= self.hp.n:
            raise ConfigError(f"k must satisfy 1 <= k <= n, got k={k}, n={self.hp.n}")
        sims = self.similarities(z)
        idx, top = kernels.topk_batch(sims, k)
        return idx[0], top[0]

    # -- inference ----------------------------------------------------

    def forward_batch(self, Z):
        """Aggregated outputs for a batch: (y_hat, indices, similarities)."""
        Z = as_embedding_batch(Z, self.hp.d)
        hp = self.hp
        sims = kernels.cosine_matrix(kernels.unit_rows(Z), self._keys_unit)
        yhat = np.empty((Z.shape[0], hp.m))
        idx = np.empty((Z.shape[0], hp.k), np.int64)
        top = np.empty((Z.shape[0], hp.k))
        status = kernels.ensemble_forward(
            self.W, self.b, Z, sims, hp.k, hp.tau, yhat, idx, top
        )
        if status >= 0:
            raise NumericError(
                "degenerate aggregation: selected similarities sum to ~0 "
                f"for sample {status}"
            )
        return yhat, idx, top

    def forward(self, z) -> ModelOutput:
        yhat, idx, top = self.forward_batch(z)
        return ModelOutput(y_hat=yhat[0], indices=idx[0], similarities=top[0])

    def scores_batch(self, Z) -> np.ndarray:
        """Aggregated class scores only (uniform across model kinds)."""
        yhat, _, _ = self.forward_batch(Z)
        return yhat

    def predict_batch(self, Z) -> np.ndarray:
        """Predicted class per row; argmax ties go to the lower class index."""
        return np.argmax(self.scores_batch(Z), axis=1)

    def predict(self, z) -> int:
        return int(self.predict_batch(z)[0])

    # -- training -----------------------------------------------------

    def batch_gradients(self, Z, labels):
        """Dense batch-summed gradients (gW, gb) of the dot-product loss.

        Zero everywhere except the selected classifiers' rows for each
        sample's true class.
        """
        Z = as_embedding_batch(Z, self.hp.d)
        labels = self._check_labels(labels, Z.shape[0])
        gW = np.zeros_like(self.W)
        gb = np.zeros_like(self.b)
        sims = kernels.cosine_matrix(kernels.unit_rows(Z), self._keys_unit)
        status = kernels.accumulate_grads(
            self.W, self.b, Z, sims, labels, self.hp.k, self.hp.tau, gW, gb
        )
        if status >= 0:
            raise NumericError(
                "degenerate aggregation: selected similarities sum to ~0 "
                f"for sample {status}"
            )
        return gW, gb

    def train_step(self, Z, labels) -> None:
        """One optimizer step: sum gradients over the batch, then move
        every parameter by -lr*sign(gradient) - decay*parameter."""
        Z = as_embedding_batch(Z, self.hp.d)
        labels = self._check_labels(labels, Z.shape[0])
        hp = self.hp
        self._gW.fill(0.0)
        self._gb.fill(0.0)
        sims = kernels.cosine_matrix(kernels.unit_rows(Z), self._keys_unit)
        status = kernels.accumulate_grads(
            self.W, self.b, Z, sims, labels, hp.k, hp.tau, self._gW, self._gb
        )
        if status >= 0:
            raise NumericError(
                "degenerate aggregation: selected similarities sum to ~0 "
                f"for sample {status}"
            )
        kernels.sign_step(self.W.reshape(-1), self._gW.reshape(-1), hp.lr, hp.decay)
        decay_b = hp.decay if hp.decay_biases else 0.0
        kernels.sign_step(self.b.reshape(-1), self._gb.reshape(-1), hp.lr, decay_b)

    def _check_labels(self, labels, count):
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if labels.shape != (count,):
            raise ConfigError(f"expected {count} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.hp.m):
            raise ConfigError(f"labels must lie in [0, {self.hp.m})")
        return labels

    def key_fingerprint(self) -> str:
        """SHA-256 of the key matrix bytes (keys must never change)."""
        return hashlib.sha256(self.keys.tobytes()).hexdigest()

    def check_finite(self) -> None:
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise NumericError("non-finite classifier parameters after update")


def ensemble_forward(mem: EnsembleMemory, z) -> ModelOutput:
    """Functional alias for EnsembleMemory.forward."""
    return mem.forward(z)


def top_k_select(mem: EnsembleMemory, z, k=None):
    """Functional alias for EnsembleMemory.top_k."""
    return mem.top_k(z, k)
