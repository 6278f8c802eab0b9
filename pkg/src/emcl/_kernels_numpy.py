"""Pure-numpy twins of the numba kernels (fallback backend).

Same signatures and semantics as ``_kernels_numba``.  The single-
classifier (baseline) paths reuse the exact einsum helpers of the
ensemble paths with k=1 shaped arrays, so an n=1, k=1 ensemble and a
stand-alone tanh classifier stay bit-identical on this backend too.
"""

import numpy as np

BACKEND_NAME = "numpy"

_DEGENERATE_EPS = 1e-9

# cap on gathered-weight scratch (float64 elements per forward chunk)
_CHUNK_ELEMS = 8_000_000


def _topk_stable(sims, k):
    """Stable descending top-k per row: equal similarities keep the
    lower key index first."""
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(sims, order, axis=1)


def topk_batch(sims, k):
    idx, top = _topk_stable(sims, k)
    return np.ascontiguousarray(idx), np.ascontiguousarray(top)


def _psi_rows(w_rows, b_rows, Z):
    # w_rows: (B, k, d), b_rows: (B, k), Z: (B, d) -> (B, k)
    return np.einsum("bkd,bd->bk", w_rows, Z) + b_rows


def _row_grads(alpha, psi, tau, Z):
    # batch-summed d(loss)/d(row) coefficients; alpha, psi: (B, k)
    sech2 = 1.0 / np.cosh(psi / tau) ** 2
    coeff = -(alpha * sech2)
    return coeff, coeff[:, :, None] * Z[:, None, :]


def accumulate_grads(W, b, Z, sims, labels, k, tau, gW, gb):
    idx, top = _topk_stable(sims, k)
    ssum = top.sum(axis=1)
    bad = np.abs(ssum) <= _DEGENERATE_EPS
    if bad.any():
        return int(np.argmax(bad))
    alpha = top / ssum[:, None]
    cols = labels[:, None]
    psi = _psi_rows(W[idx, cols, :], b[idx, cols], Z)
    coeff, gw_rows = _row_grads(alpha, psi, tau, Z)
    np.add.at(gW, (idx, cols), gw_rows)
    np.add.at(gb, (idx, cols), coeff)
    return -1


def tanh_accumulate_grads(W, b, Z, labels, tau, gW, gb):
    alpha = np.ones((Z.shape[0], 1))
    psi = _psi_rows(W[labels][:, None, :], b[labels][:, None], Z)
    coeff, gw_rows = _row_grads(alpha, psi, tau, Z)
    np.add.at(gW, labels, gw_rows[:, 0, :])
    np.add.at(gb, labels, coeff[:, 0])
    return -1


def _aggregate(alpha, w_sel, b_sel, Z, tau):
    # w_sel: (B, k, m, d), b_sel: (B, k, m) -> weighted average (B, m)
    psi = np.einsum("bkmd,bd->bkm", w_sel, Z) + b_sel
    v = tau * np.tanh(psi / tau)
    return np.einsum("bk,bkm->bm", alpha, v)


def ensemble_forward(W, b, Z, sims, k, tau, yhat, idx_out, sim_out):
    idx, top = _topk_stable(sims, k)
    idx_out[:] = idx
    sim_out[:] = top
    ssum = top.sum(axis=1)
    bad = np.abs(ssum) <= _DEGENERATE_EPS
    if bad.any():
        return int(np.argmax(bad))
    alpha = top / ssum[:, None]
    m, d = W.shape[1], W.shape[2]
    step = max(1, _CHUNK_ELEMS // (k * m * d))
    for lo in range(0, Z.shape[0], step):
        hi = min(lo + step, Z.shape[0])
        sel = idx[lo:hi]
        yhat[lo:hi] = _aggregate(alpha[lo:hi], W[sel], b[sel], Z[lo:hi], tau)
    return -1


def tanh_forward(W, b, Z, tau, yhat):
    bsz = Z.shape[0]
    m, d = W.shape
    alpha = np.ones((bsz, 1))
    w_sel = np.broadcast_to(W, (bsz, 1, m, d))
    b_sel = np.broadcast_to(b, (bsz, 1, m))
    yhat[:] = _aggregate(alpha, w_sel, b_sel, Z, tau)
    return -1


def sign_step(param, grad, lr, decay):
    param[:] = param - lr * np.sign(grad) - decay * param
