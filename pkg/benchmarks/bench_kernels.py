#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Covers the two hot paths: batched edit distance and the mask-fill
forward/backward used in training.  Run from the repo root:

    python benchmarks/bench_kernels.py

PCR_NUMBA=0 would disable the jit path entirely, so this script always
calls both implementations explicitly and reports the speedup.
"""

import random
import string
import time

import numpy as np

from pcrqa import kernels


def bench(fn, repeats=5):
    fn()  # warmup (jit compilation included)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_edit_distance(n_pairs=2000, max_len=30, seed=0):
    rng = random.Random(seed)
    pairs = [
        (
            kernels._encode("".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(0, max_len)))),
            kernels._encode("".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(0, max_len)))),
        )
        for _ in range(n_pairs)
    ]

    def run_numpy():
        return [kernels.levenshtein_numpy(a, b) for a, b in pairs]

    results = {"numpy": bench(run_numpy)}
    if kernels.NUMBA_ENABLED:
        def run_numba():
            return [kernels._levenshtein_jit(a, b) for a, b in pairs]

        results["numba"] = bench(run_numba)
        assert run_numba() == run_numpy()
    return results


def bench_forward_backward(n_examples=200, seed=0):
    rng = np.random.default_rng(seed)
    V, d, p, L = 300, 64, 50, 200
    E = rng.normal(size=(V, d))
    P = rng.normal(size=(p, d))
    W = rng.normal(size=(d, V))
    c = rng.normal(size=d)
    tok_ids = rng.integers(0, V, size=L)
    tok_pos = np.arange(L, dtype=np.int64)
    mask_pos = np.array([5, 6, 7, 16], dtype=np.int64)
    gold = rng.integers(0, V, size=4)

    def run(forward, backward):
        def body():
            for _ in range(n_examples):
                H, probs = forward(E, P, W, c, tok_ids, tok_pos, L + 2, L + 2 + p, mask_pos)
                dE = np.zeros_like(E)
                dP = np.zeros_like(P)
                dW = np.zeros_like(W)
                dc = np.zeros_like(c)
                backward(
                    E, P, W, c, tok_ids, tok_pos, L + 2, L + 2 + p, mask_pos, gold,
                    H, probs, dE, dP, dW, dc,
                )
        return body

    results = {"numpy": bench(run(kernels.forward_numpy, kernels.backward_numpy))}
    if kernels.NUMBA_ENABLED:
        results["numba"] = bench(run(kernels._forward_jit, kernels._backward_jit))
    return results


def report(name, results):
    print(f"\n{name}")
    for backend, seconds in results.items():
        print(f"  {backend:6s} {seconds * 1000:9.2f} ms")
    if "numba" in results:
        print(f"  speedup {results['numpy'] / results['numba']:.2f}x")


if __name__ == "__main__":
    print(f"active backend: {kernels.active_backend()}")
    report("edit distance (2000 pairs, len<=30)", bench_edit_distance())
    report("mask-fill fwd+bwd (200 examples, V=300 d=64)", bench_forward_backward())
