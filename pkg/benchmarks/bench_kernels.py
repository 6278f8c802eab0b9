"""Benchmark the numba kernels against their pure-numpy twins.

Times the three hot paths on realistic shapes (n=1024 classifiers,
d=64 embeddings, k=32 selection): per-batch gradient accumulation, the
sign update, and a full-test-set forward pass.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from emcl import kernels
from emcl.kernels import get_impl

N, D, M, K = 1024, 64, 10, 32
BATCH, EVAL = 10, 1000
REPEATS = 50


def setup():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((N, M, D)) * 0.1
    b = np.zeros((N, M))
    keys_u = kernels.unit_rows(rng.standard_normal((N, D)))
    Zb = rng.standard_normal((BATCH, D))
    Ze = rng.standard_normal((EVAL, D))
    labels = rng.integers(0, M, BATCH)
    sims_b = kernels.unit_rows(Zb) @ keys_u.T
    sims_e = kernels.unit_rows(Ze) @ keys_u.T
    return W, b, Zb, Ze, labels, sims_b, sims_e


def bench(impl):
    W, b, Zb, Ze, labels, sims_b, sims_e = setup()
    gW, gb = np.zeros_like(W), np.zeros_like(b)
    yhat = np.empty((EVAL, M))
    idx = np.empty((EVAL, K), np.int64)
    top = np.empty((EVAL, K))

    # warm-up (numba compiles here)
    impl.accumulate_grads(W, b, Zb, sims_b, labels, K, 250.0, gW, gb)
    impl.sign_step(W.reshape(-1), gW.reshape(-1), 1e-4, 1e-4)
    impl.ensemble_forward(W, b, Ze[:64], sims_e[:64], K, 250.0,
                          yhat[:64], idx[:64], top[:64])

    out = {}
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        gW.fill(0.0)
        gb.fill(0.0)
        impl.accumulate_grads(W, b, Zb, sims_b, labels, K, 250.0, gW, gb)
    out["train grads (batch of %d)" % BATCH] = (time.perf_counter() - t0) / REPEATS

    t0 = time.perf_counter()
    for _ in range(REPEATS):
        impl.sign_step(W.reshape(-1), gW.reshape(-1), 1e-4, 1e-4)
        impl.sign_step(b.reshape(-1), gb.reshape(-1), 1e-4, 1e-4)
    out["sign update (%d params)" % (W.size + b.size)] = (
        time.perf_counter() - t0
    ) / REPEATS

    t0 = time.perf_counter()
    for _ in range(5):
        impl.ensemble_forward(W, b, Ze, sims_e, K, 250.0, yhat, idx, top)
    out["forward (%d samples)" % EVAL] = (time.perf_counter() - t0) / 5
    return out


def main():
    results = {}
    for name in ("numpy", "numba"):
        try:
            results[name] = bench(get_impl(name))
        except Exception as exc:  # numba may be unavailable
            print(f"skipping {name}: {exc}")
    if len(results) < 2:
        for name, rows in results.items():
            for what, dt in rows.items():
                print(f"{name:6s} {what:28s} {dt * 1e3:8.3f} ms")
        return
    print(f"{'kernel':32s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for what in results["numpy"]:
        tn = results["numpy"][what]
        tb = results["numba"][what]
        print(f"{what:32s} {tn * 1e3:9.3f}ms {tb * 1e3:9.3f}ms {tn / tb:7.1f}x")


if __name__ == "__main__":
    main()
