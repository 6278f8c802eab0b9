"""Stand-alone single-classifier baselines.

Both train with the same sign optimizer as the ensemble.  The tanh
flavor shares the ensemble members' activation and loss, so with the
same seed it coincides exactly with an n=1, k=1 ensemble.  The vanilla
flavor is a conventional linear classifier with a log-softmax and
negative log-likelihood loss, whose gradient couples all classes.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import ConfigError, NumericError
from .model import INIT_STREAM, Hyperparams, as_embedding_batch, truncated_normal


class _SingleClassifier:
    def __init__(self, hp: Hyperparams):
        hp.validate()
        self.hp = hp
        init_rng = np.random.default_rng([hp.seed, INIT_STREAM])
        self.W = truncated_normal(
            init_rng, (hp.m, hp.d), std=hp.init_scale / math.sqrt(hp.d)
        )
        self.b = np.zeros(hp.m)
        self._gW = np.zeros_like(self.W)
        self._gb = np.zeros_like(self.b)

    def _check_labels(self, labels, count):
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if labels.shape != (count,):
            raise ConfigError(f"expected {count} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.hp.m):
            raise ConfigError(f"labels must lie in [0, {self.hp.m})")
        return labels

    def predict_batch(self, Z) -> np.ndarray:
        return np.argmax(self.scores_batch(Z), axis=1)

    def predict(self, z) -> int:
        return int(self.predict_batch(z)[0])

    def _apply_update(self):
        hp = self.hp
        kernels.sign_step(self.W.reshape(-1), self._gW.reshape(-1), hp.lr, hp.decay)
        decay_b = hp.decay if hp.decay_biases else 0.0
        kernels.sign_step(self.b, self._gb, hp.lr, decay_b)

    def check_finite(self) -> None:
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise NumericError("non-finite classifier parameters after update")


class TanhBaseline(_SingleClassifier):
    """One scaled-tanh classifier with the dot-product loss."""

    def forward_batch(self, Z) -> np.ndarray:
        Z = as_embedding_batch(Z, self.hp.d)
        yhat = np.empty((Z.shape[0], self.hp.m))
        kernels.tanh_forward(self.W, self.b, Z, self.hp.tau, yhat)
        return yhat

    scores_batch = forward_batch

    def batch_gradients(self, Z, labels):
        Z = as_embedding_batch(Z, self.hp.d)
        labels = self._check_labels(labels, Z.shape[0])
        gW = np.zeros_like(self.W)
        gb = np.zeros_like(self.b)
        kernels.tanh_accumulate_grads(self.W, self.b, Z, labels, self.hp.tau, gW, gb)
        return gW, gb

    def train_step(self, Z, labels) -> None:
        Z = as_embedding_batch(Z, self.hp.d)
        labels = self._check_labels(labels, Z.shape[0])
        self._gW.fill(0.0)
        self._gb.fill(0.0)
        kernels.tanh_accumulate_grads(
            self.W, self.b, Z, labels, self.hp.tau, self._gW, self._gb
        )
        self._apply_update()


def log_softmax(logits) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class VanillaBaseline(_SingleClassifier):
    """Conventional linear classifier: log-softmax, NLL loss."""

    def logits_batch(self, Z) -> np.ndarray:
        Z = as_embedding_batch(Z, self.hp.d)
        return Z @ self.W.T + self.b

    scores_batch = logits_batch

    def nll_batch(self, Z, labels) -> np.ndarray:
        labels = self._check_labels(labels, np.atleast_2d(Z).shape[0])
        ls = log_softmax(self.logits_batch(Z))
        return -ls[np.arange(labels.size), labels]

    def batch_gradients(self, Z, labels):
        Z = as_embedding_batch(Z, self.hp.d)
        labels = self._check_labels(labels, Z.shape[0])
        probs = np.exp(log_softmax(self.logits_batch(Z)))
        probs[np.arange(labels.size), labels] -= 1.0
        return probs.T @ Z, probs.sum(axis=0)

    def train_step(self, Z, labels) -> None:
        gW, gb = self.batch_gradients(Z, labels)
        self._gW[:] = gW
        self._gb[:] = gb
        self._apply_update()
