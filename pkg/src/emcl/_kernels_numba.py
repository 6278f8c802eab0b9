"""Numba implementations of the hot inner loops.

Every function here has a pure-numpy twin with the same signature in
``_kernels_numpy``; ``kernels`` picks one of the two at import time.
Cosine-similarity matrices are computed with BLAS *outside* these
kernels (a big matmul beats any loop), so the kernels only do
selection, aggregation, gradient accumulation and the sign update.

All floats are float64: the sign step is sensitive to cancellation,
so dot products are accumulated in double precision throughout.
"""

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

# |sum of selected similarities| at or below this is treated as a
# degenerate aggregation (the weighted average is undefined).
_DEGENERATE_EPS = 1e-9


@njit(cache=True)
def _topk_into(sims, k, idx_out, sim_out):
    """Fill idx_out/sim_out with the top-k of sims, descending.

    Equal similarities keep ascending index order (lower index wins),
    matching a stable descending sort.
    """
    filled = 0
    for i in range(sims.shape[0]):
        s = sims[i]
        if filled < k:
            j = filled
            while j > 0 and sim_out[j - 1] < s:
                sim_out[j] = sim_out[j - 1]
                idx_out[j] = idx_out[j - 1]
                j -= 1
            sim_out[j] = s
            idx_out[j] = i
            filled += 1
        elif s > sim_out[k - 1]:
            j = k - 1
            while j > 0 and sim_out[j - 1] < s:
                sim_out[j] = sim_out[j - 1]
                idx_out[j] = idx_out[j - 1]
                j -= 1
            sim_out[j] = s
            idx_out[j] = i


@njit(cache=True)
def topk_batch(sims, k):
    """Top-k indices and similarities per row of sims (N, n)."""
    rows = sims.shape[0]
    idx = np.empty((rows, k), np.int64)
    top = np.empty((rows, k), np.float64)
    for r in range(rows):
        _topk_into(sims[r], k, idx[r], top[r])
    return idx, top


@njit(cache=True)
def accumulate_grads(W, b, Z, sims, labels, k, tau, gW, gb):
    """Add the summed per-sample loss gradients for one batch into gW/gb.

    Only the selected classifiers' rows for each sample's true class are
    touched; everything else stays exactly zero.  Returns -1 on success,
    or the index of the first sample whose selected similarities sum to
    (near) zero.
    """
    bsz = Z.shape[0]
    d = Z.shape[1]
    idx = np.empty(k, np.int64)
    top = np.empty(k, np.float64)
    for s in range(bsz):
        _topk_into(sims[s], k, idx, top)
        ssum = 0.0
        for j in range(k):
            ssum += top[j]
        if abs(ssum) <= _DEGENERATE_EPS:
            return s
        c = labels[s]
        for j in range(k):
            i = idx[j]
            alpha = top[j] / ssum
            psi = b[i, c]
            for l in range(d):
                psi += W[i, c, l] * Z[s, l]
            u = psi / tau
            ch = math.cosh(u)
            sech2 = 1.0 / (ch * ch)
            coeff = -(alpha * sech2)
            for l in range(d):
                gW[i, c, l] += coeff * Z[s, l]
            gb[i, c] += coeff
    return -1


@njit(cache=True)
def ensemble_forward(W, b, Z, sims, k, tau, yhat, idx_out, sim_out):
    """Similarity-weighted aggregation of the selected classifiers.

    Fills yhat (N, m) plus the selected indices/similarities per sample.
    Returns -1 on success or the first degenerate sample index.
    """
    bsz = Z.shape[0]
    m = W.shape[1]
    d = Z.shape[1]
    for s in range(bsz):
        _topk_into(sims[s], k, idx_out[s], sim_out[s])
        ssum = 0.0
        for j in range(k):
            ssum += sim_out[s, j]
        if abs(ssum) <= _DEGENERATE_EPS:
            return s
        for c in range(m):
            yhat[s, c] = 0.0
        for j in range(k):
            i = idx_out[s, j]
            alpha = sim_out[s, j] / ssum
            for c in range(m):
                psi = b[i, c]
                for l in range(d):
                    psi += W[i, c, l] * Z[s, l]
                yhat[s, c] += alpha * (tau * math.tanh(psi / tau))
    return -1


@njit(cache=True)
def sign_step(param, grad, lr, decay):
    """In-place naive sign update with decoupled weight decay.

    theta <- theta - lr*sign(g) - decay*theta, with sign(0) = 0 so a
    zero gradient leaves only the decay term.
    """
    for i in range(param.shape[0]):
        g = grad[i]
        p = param[i]
        if g > 0.0:
            param[i] = p - lr - decay * p
        elif g < 0.0:
            param[i] = p + lr - decay * p
        else:
            param[i] = p - decay * p


@njit(cache=True)
def tanh_forward(W, b, Z, tau, yhat):
    """Scaled-tanh output of a single classifier for a batch (twin of the
    one-member aggregation path, kept bit-compatible with it)."""
    bsz = Z.shape[0]
    m = W.shape[0]
    d = Z.shape[1]
    for s in range(bsz):
        for c in range(m):
            psi = b[c]
            for l in range(d):
                psi += W[c, l] * Z[s, l]
            yhat[s, c] = tau * math.tanh(psi / tau)
    return -1


@njit(cache=True)
def tanh_accumulate_grads(W, b, Z, labels, tau, gW, gb):
    """Batch-summed gradients for a single scaled-tanh classifier."""
    bsz = Z.shape[0]
    d = Z.shape[1]
    for s in range(bsz):
        c = labels[s]
        alpha = 1.0
        psi = b[c]
        for l in range(d):
            psi += W[c, l] * Z[s, l]
        u = psi / tau
        ch = math.cosh(u)
        sech2 = 1.0 / (ch * ch)
        coeff = -(alpha * sech2)
        for l in range(d):
            gW[c, l] += coeff * Z[s, l]
        gb[c] += coeff
    return -1
