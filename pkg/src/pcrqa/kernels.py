"""Hot numeric kernels: edit-distance DP and the mask-fill forward/backward.

Two interchangeable implementations live here: numba @njit loop kernels and
a pure-numpy vectorized path.  PCR_NUMBA=0 selects the numpy path (the
default is numba when importable); both produce the same values up to
floating-point summation order.  benchmarks/bench_kernels.py compares them.

Context model for a mask at position m: every non-mask element i of the
prompt (token embedding, prefix row, or the code-graph vector) contributes
with weight 1 / (1 + |pos_i - m|); the weighted mean is projected through
the output matrix and softmaxed over the vocabulary.
"""

import os

import numpy as np

NUMBA_ENV_FLAG = "PCR_NUMBA"

_numba_requested = os.environ.get(NUMBA_ENV_FLAG, "1") != "0"
if _numba_requested:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def active_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# --- edit distance ----------------------------------------------------------


def _levenshtein_loops(a, b):
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = np.arange(lb + 1, dtype=np.int64)
    cur = np.zeros(lb + 1, dtype=np.int64)
    for i in range(1, la + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, lb + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            if prev[j - 1] + cost < best:
                best = prev[j - 1] + cost
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[lb])


if NUMBA_ENABLED:
    _levenshtein_jit = njit(cache=True)(_levenshtein_loops)


def levenshtein_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Row-vectorized DP; the insert chain folds via a prefix-min trick."""
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    idx = np.arange(lb + 1)
    prev = idx.copy()
    for i in range(1, la + 1):
        cur = np.empty(lb + 1, dtype=np.int64)
        cur[0] = i
        cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        # cur[j] = min over j' <= j of cur[j'] + (j - j')
        cur = np.minimum(cur, np.minimum.accumulate(cur - idx) + idx)
        prev = cur
    return int(prev[lb])


def _encode(s: str) -> np.ndarray:
    return np.array([ord(ch) for ch in s], dtype=np.int64)


def edit_distance(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance between two strings."""
    ca, cb = _encode(a), _encode(b)
    if NUMBA_ENABLED:
        return int(_levenshtein_jit(ca, cb))
    return levenshtein_numpy(ca, cb)


# --- mask-fill forward / backward -------------------------------------------
#
# Shapes: E (V, d) token embeddings; P (p, d) prefix rows; W (d, V) output
# weights; c (d,) code-graph vector.  tok_ids/tok_pos list the non-mask
# token positions; the prefix occupies prefix_start..prefix_start+p-1 and
# the graph sits at g_pos.  mask_pos are the positions to predict.


def _forward_loops(E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos):
    d = E.shape[1]
    V = W.shape[1]
    p = P.shape[0]
    M = len(mask_pos)
    H = np.zeros((M, d))
    probs = np.zeros((M, V))
    for mi in range(M):
        m = mask_pos[mi]
        h = np.zeros(d)
        wsum = 0.0
        for t in range(len(tok_ids)):
            w = 1.0 / (1.0 + abs(tok_pos[t] - m))
            wsum += w
            for k in range(d):
                h[k] += w * E[tok_ids[t], k]
        for r in range(p):
            w = 1.0 / (1.0 + abs(prefix_start + r - m))
            wsum += w
            for k in range(d):
                h[k] += w * P[r, k]
        wg = 1.0 / (1.0 + abs(g_pos - m))
        wsum += wg
        for k in range(d):
            h[k] += wg * c[k]
        for k in range(d):
            h[k] /= wsum
        z = np.zeros(V)
        zmax = -1e300
        for v in range(V):
            s = 0.0
            for k in range(d):
                s += h[k] * W[k, v]
            z[v] = s
            if s > zmax:
                zmax = s
        esum = 0.0
        for v in range(V):
            z[v] = np.exp(z[v] - zmax)
            esum += z[v]
        for v in range(V):
            probs[mi, v] = z[v] / esum
        for k in range(d):
            H[mi, k] = h[k]
    return H, probs


def _backward_loops(
    E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos, gold_ids,
    H, probs, dE, dP, dW, dc,
):
    d = E.shape[1]
    V = W.shape[1]
    p = P.shape[0]
    loss = 0.0
    for mi in range(len(mask_pos)):
        m = mask_pos[mi]
        g = gold_ids[mi]
        loss -= np.log(max(probs[mi, g], 1e-300))
        wsum = 0.0
        for t in range(len(tok_ids)):
            wsum += 1.0 / (1.0 + abs(tok_pos[t] - m))
        for r in range(p):
            wsum += 1.0 / (1.0 + abs(prefix_start + r - m))
        wg = 1.0 / (1.0 + abs(g_pos - m))
        wsum += wg
        dh = np.zeros(d)
        for v in range(V):
            dz = probs[mi, v] - (1.0 if v == g else 0.0)
            for k in range(d):
                dW[k, v] += H[mi, k] * dz
                dh[k] += W[k, v] * dz
        for t in range(len(tok_ids)):
            w = (1.0 / (1.0 + abs(tok_pos[t] - m))) / wsum
            for k in range(d):
                dE[tok_ids[t], k] += w * dh[k]
        for r in range(p):
            w = (1.0 / (1.0 + abs(prefix_start + r - m))) / wsum
            for k in range(d):
                dP[r, k] += w * dh[k]
        wgn = wg / wsum
        for k in range(d):
            dc[k] += wgn * dh[k]
    return loss


if NUMBA_ENABLED:
    _forward_jit = njit(cache=True)(_forward_loops)
    _backward_jit = njit(cache=True)(_backward_loops)


def _weights_numpy(tok_pos, prefix_start, p, g_pos, mask_pos):
    pos = np.concatenate(
        [tok_pos, prefix_start + np.arange(p, dtype=np.int64), np.array([g_pos])]
    )
    return 1.0 / (1.0 + np.abs(pos[None, :] - np.asarray(mask_pos)[:, None]))


def forward_numpy(E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos):
    X = np.concatenate([E[tok_ids], P, c[None, :]], axis=0)
    weights = _weights_numpy(tok_pos, prefix_start, P.shape[0], g_pos, mask_pos)
    H = (weights @ X) / weights.sum(axis=1, keepdims=True)
    Z = H @ W
    Z -= Z.max(axis=1, keepdims=True)
    np.exp(Z, out=Z)
    probs = Z / Z.sum(axis=1, keepdims=True)
    return H, probs


def backward_numpy(
    E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos, gold_ids,
    H, probs, dE, dP, dW, dc,
):
    p = P.shape[0]
    weights = _weights_numpy(tok_pos, prefix_start, p, g_pos, mask_pos)
    wsums = weights.sum(axis=1)
    loss = 0.0
    dZ = probs.copy()
    for mi, g in enumerate(gold_ids):
        loss -= float(np.log(max(probs[mi, g], 1e-300)))
        dZ[mi, g] -= 1.0
    dW += H.T @ dZ
    dH = dZ @ W.T
    dX = (weights / wsums[:, None]).T @ dH
    n_tok = len(tok_ids)
    np.add.at(dE, np.asarray(tok_ids), dX[:n_tok])
    dP += dX[n_tok : n_tok + p]
    dc += dX[n_tok + p]
    return loss


def forward(E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos):
    if NUMBA_ENABLED:
        return _forward_jit(E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos)
    return forward_numpy(E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos)


def backward(
    E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos, gold_ids,
    H, probs, dE, dP, dW, dc,
):
    if NUMBA_ENABLED:
        return _backward_jit(
            E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos, gold_ids,
            H, probs, dE, dP, dW, dc,
        )
    return backward_numpy(
        E, P, W, c, tok_ids, tok_pos, prefix_start, g_pos, mask_pos, gold_ids,
        H, probs, dE, dP, dW, dc,
    )
