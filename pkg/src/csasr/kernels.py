"""Hot numeric kernels shared by training and scoring.

Each kernel is written once as plain loop-over-ndarray Python and compiled
with numba's @njit at import time.  Setting CSASR_PURE_NUMPY=1 (or running
without numba installed) selects the interpreted twin instead; results are
identical either way.  benchmarks/bench_kernels.py times the two paths.
"""

import math
import os

import numpy as np

NEG_INF = -np.inf


def _want_numba():
    if os.environ.get("CSASR_PURE_NUMPY", "").strip() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _ctc_forward_backward(logp, aug):
    """Log-space CTC forward-backward over the blank-augmented label sequence.

    logp: (T, V) per-frame log posteriors, column 0 = blank.
    aug:  (S,) augmented labels [blank, z1, blank, z2, ..., blank], S = 2U+1.

    Returns (loglik, gamma) where loglik = ln P(z|x) summed over all paths
    that collapse to z, and gamma is the (T, V) per-frame symbol occupancy
    (rows sum to 1); the loss gradient w.r.t. logits is exp(logp) - gamma.
    """
    T = logp.shape[0]
    V = logp.shape[1]
    S = aug.shape[0]

    alpha = np.full((T, S), NEG_INF)
    beta = np.full((T, S), NEG_INF)

    alpha[0, 0] = logp[0, aug[0]]
    if S > 1:
        alpha[0, 1] = logp[0, aug[1]]
    for t in range(1, T):
        for s in range(S):
            a = alpha[t - 1, s]
            if s >= 1:
                b = alpha[t - 1, s - 1]
                if a < b:
                    a, b = b, a
                if b != NEG_INF:
                    a = a + math.log1p(math.exp(b - a))
            if s >= 2 and aug[s] != 0 and aug[s] != aug[s - 2]:
                b = alpha[t - 1, s - 2]
                if a < b:
                    a, b = b, a
                if b != NEG_INF:
                    a = a + math.log1p(math.exp(b - a))
            alpha[t, s] = a + logp[t, aug[s]]

    loglik = alpha[T - 1, S - 1]
    if S > 1:
        b = alpha[T - 1, S - 2]
        if loglik < b:
            loglik, b = b, loglik
        if b != NEG_INF:
            loglik = loglik + math.log1p(math.exp(b - loglik))

    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            a = beta[t + 1, s] + logp[t + 1, aug[s]]
            if s + 1 < S:
                b = beta[t + 1, s + 1] + logp[t + 1, aug[s + 1]]
                if a < b:
                    a, b = b, a
                if b != NEG_INF:
                    a = a + math.log1p(math.exp(b - a))
            if s + 2 < S and aug[s + 2] != 0 and aug[s + 2] != aug[s]:
                b = beta[t + 1, s + 2] + logp[t + 1, aug[s + 2]]
                if a < b:
                    a, b = b, a
                if b != NEG_INF:
                    a = a + math.log1p(math.exp(b - a))
            beta[t, s] = a

    gamma = np.zeros((T, V))
    for t in range(T):
        for s in range(S):
            g = alpha[t, s] + beta[t, s] - loglik
            if g != NEG_INF:
                gamma[t, aug[s]] += math.exp(g)
    return loglik, gamma


def _levenshtein_counts(ref, hyp):
    """Word-level alignment with unit costs.

    Returns (distance, substitutions, deletions, insertions).  Ties prefer
    match/substitution over deletion over insertion so counts are
    deterministic across runs.
    """
    n = ref.shape[0]
    m = hyp.shape[0]
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    back = np.zeros((n + 1, m + 1), dtype=np.int8)
    for i in range(1, n + 1):
        cost[i, 0] = i
        back[i, 0] = 2
    for j in range(1, m + 1):
        cost[0, j] = j
        back[0, j] = 3
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                best = cost[i - 1, j - 1]
                code = 0
            else:
                best = cost[i - 1, j - 1] + 1
                code = 1
            d = cost[i - 1, j] + 1
            if d < best:
                best = d
                code = 2
            ins = cost[i, j - 1] + 1
            if ins < best:
                best = ins
                code = 3
            cost[i, j] = best
            back[i, j] = code
    i = n
    j = m
    subs = 0
    dels = 0
    inss = 0
    while i > 0 or j > 0:
        c = back[i, j]
        if c == 0:
            i -= 1
            j -= 1
        elif c == 1:
            subs += 1
            i -= 1
            j -= 1
        elif c == 2:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return cost[n, m], subs, dels, inss


if _want_numba():
    from numba import njit

    BACKEND = "numba"
    ctc_forward_backward = njit(cache=True)(_ctc_forward_backward)
    levenshtein_counts = njit(cache=True)(_levenshtein_counts)
else:
    BACKEND = "numpy"
    ctc_forward_backward = _ctc_forward_backward
    levenshtein_counts = _levenshtein_counts
