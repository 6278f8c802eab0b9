"""Hot-kernel backend selection.

Set ``EMCL_BACKEND=numpy`` to force the pure-numpy fallback,
``EMCL_BACKEND=numba`` to require the jitted kernels, or leave unset
("auto") to use numba when it imports and numpy otherwise.

Similarity matrices are plain BLAS matmuls and live here, outside the
per-backend modules.
"""

import os

import numpy as np

from . import _kernels_numpy
from .errors import ConfigError

# |sum of selected similarities| at or below this aborts aggregation
DEGENERATE_EPS = 1e-9

_CHOICE = os.environ.get("EMCL_BACKEND", "auto").lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"EMCL_BACKEND must be 'auto', 'numba' or 'numpy', got {_CHOICE!r}"
    )

if _CHOICE == "numpy":
    _impl = _kernels_numpy
else:
    try:
        from . import _kernels_numba as _impl
    except ImportError:
        if _CHOICE == "numba":
            raise ConfigError("EMCL_BACKEND=numba but numba is not importable")
        _impl = _kernels_numpy


def backend_name():
    return _impl.BACKEND_NAME


def get_impl(name):
    """Fetch a backend module by name (used by tests and benchmarks)."""
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ConfigError(f"unknown backend {name!r}")


def use(name):
    """Switch the active backend in-process (test/benchmark hook)."""
    global _impl
    _impl = get_impl(name)


def unit_rows(X):
    """Rows scaled to unit Euclidean norm (caller guarantees no zero rows)."""
    X = np.asarray(X, dtype=np.float64)
    return X / np.linalg.norm(X, axis=1)[:, None]


def cosine_matrix(Zu, Ku):
    """All-pairs cosine similarities from pre-normalized rows."""
    return Zu @ Ku.T


def topk_batch(sims, k):
    return _impl.topk_batch(sims, k)


def accumulate_grads(W, b, Z, sims, labels, k, tau, gW, gb):
    return _impl.accumulate_grads(W, b, Z, sims, labels, k, tau, gW, gb)


def ensemble_forward(W, b, Z, sims, k, tau, yhat, idx_out, sim_out):
    return _impl.ensemble_forward(W, b, Z, sims, k, tau, yhat, idx_out, sim_out)


def tanh_forward(W, b, Z, tau, yhat):
    return _impl.tanh_forward(W, b, Z, tau, yhat)


def tanh_accumulate_grads(W, b, Z, labels, tau, gW, gb):
    return _impl.tanh_accumulate_grads(W, b, Z, labels, tau, gW, gb)


def sign_step(param, grad, lr, decay):
    return _impl.sign_step(param, grad, lr, decay)
