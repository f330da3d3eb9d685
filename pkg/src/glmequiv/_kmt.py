"""Compiled kernel for the dyadic coupling of integer-valued block sums.

Each node of a binary tree over the index range carries the exact pmf of its
block sum. Given the Gaussian block sums ``G`` of one replication, the root
total is the pmf quantile of ``Phi(G_root / sigma_root)``; a node's total is then
split between its children at the conditional quantile of the left sum given
the parent total, evaluated at the probability level of the left Gaussian sum
given the parent Gaussian sum.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from numba import njit, prange

# numba falls back to another threading layer when the installed TBB is too
# old; the fallback is harmless, so its notice is not shown to users
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

_SQRT1_2 = 1.0 / math.sqrt(2.0)


@njit(cache=True, nogil=True)
def _phi(x):
    return 0.5 * math.erfc(-x * _SQRT1_2)


@njit(cache=True, nogil=True)
def _split(T, u, pl, pr, pp, mean_l, var_l, mean_p, var_p, var_r):
    len_l = pl.shape[0]
    len_r = pr.shape[0]
    kmin = max(0, T - (len_r - 1))
    kmax = min(T, len_l - 1)
    if kmin >= kmax:
        return kmin
    center = mean_l + (T - mean_p) * var_l / var_p
    half = 12.0 * math.sqrt(var_l * var_r / var_p) + 10.0
    a = max(kmin, int(math.floor(center - half)))
    b = min(kmax, int(math.ceil(center + half)))
    total = 0.0
    if a <= b:
        for k in range(a, b + 1):
            total += pl[k] * pr[T - k]
    target_mass = pp[T] if T < pp.shape[0] else 0.0
    if a > b or total < (1.0 - 1e-9) * target_mass or total <= 0.0:
        # window missed part of the conditional law: rescan the full support
        a, b = kmin, kmax
        total = 0.0
        for k in range(a, b + 1):
            total += pl[k] * pr[T - k]
        if total <= 0.0:
            c = int(round(center))
            return min(max(c, kmin), kmax)
    target = u * total
    cum = 0.0
    for k in range(a, b + 1):
        cum += pl[k] * pr[T - k]
        if cum >= target:
            return k
    return b


@njit(cache=True, nogil=True)
def _couple_one(g, left, right, lo, pmf, off, length, root_cdf, means, vars_, out_leaf):
    n_nodes = left.shape[0]
    totals = np.empty(n_nodes, dtype=np.int64)
    u0 = _phi(g[0] / math.sqrt(vars_[0]))
    k0 = np.searchsorted(root_cdf, u0)
    totals[0] = min(k0, root_cdf.shape[0] - 1)
    for v in range(n_nodes):
        L = left[v]
        if L < 0:
            out_leaf[lo[v]] = totals[v]
            continue
        R = right[v]
        var_c = vars_[L] * vars_[R] / vars_[v]
        z = (g[L] - g[v] * vars_[L] / vars_[v]) / math.sqrt(var_c)
        u = _phi(z)
        pl = pmf[off[L]:off[L] + length[L]]
        pr = pmf[off[R]:off[R] + length[R]]
        pp = pmf[off[v]:off[v] + length[v]]
        tl = _split(totals[v], u, pl, pr, pp, means[L], vars_[L], means[v], vars_[v], vars_[R])
        totals[L] = tl
        totals[R] = totals[v] - tl


@njit(cache=True, nogil=True, parallel=True)
def couple_batch(G, left, right, lo, pmf, off, length, root_cdf, means, vars_, n):
    """Leaf totals for every replication; ``G`` has shape (reps, n_nodes)."""
    reps = G.shape[0]
    out = np.empty((reps, n), dtype=np.int64)
    for r in prange(reps):
        _couple_one(G[r], left, right, lo, pmf, off, length, root_cdf, means, vars_, out[r])
    return out
