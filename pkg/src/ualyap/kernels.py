"""Overflow-safe product kernels for long 2x2 cocycles.

The running product is rescaled by its maximum-row-sum norm after every
factor and the logs are accumulated, so chains of length 10^6 and beyond
stay in range.

The caller may supply a norm frame (L, R): factors are a conjugated
version of the true cocycle and the reported log-norms are those of
L @ product @ R.  This lets the engine multiply in a basis where critical
products are exactly (anti)diagonal, avoiding the roundoff-induced
spurious growth of the raw product, while still reporting norms of the
original cocycle.

The hot loops are numba-compiled when numba is available; a pure-numpy
fallback keeps the package importable without it.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


IDENTITY_FRAME = (np.eye(2, dtype=complex), np.eye(2, dtype=complex))


@njit(cache=True, nogil=True, inline="always")
def _framed_log_norm(a, b, c, e, L, R):
    """ln row-sum norm of L @ [[a, b], [c, e]] @ R."""
    m11 = L[0, 0] * a + L[0, 1] * c
    m12 = L[0, 0] * b + L[0, 1] * e
    m21 = L[1, 0] * a + L[1, 1] * c
    m22 = L[1, 0] * b + L[1, 1] * e
    n11 = m11 * R[0, 0] + m12 * R[1, 0]
    n12 = m11 * R[0, 1] + m12 * R[1, 1]
    n21 = m21 * R[0, 0] + m22 * R[1, 0]
    n22 = m21 * R[0, 1] + m22 * R[1, 1]
    r1 = abs(n11) + abs(n12)
    r2 = abs(n21) + abs(n22)
    return np.log(r1 if r1 > r2 else r2)


@njit(cache=True, nogil=True)
def _product_scan(factors, L, R):
    """Log-norms ln ||L (F_k ... F_1) R|| for every k = 1..n."""
    n = factors.shape[0]
    logs = np.empty(n)
    a = 1.0 + 0.0j
    b = 0.0j
    c = 0.0j
    e = 1.0 + 0.0j
    acc = 0.0
    for k in range(n):
        f11 = factors[k, 0, 0]
        f12 = factors[k, 0, 1]
        f21 = factors[k, 1, 0]
        f22 = factors[k, 1, 1]
        na = f11 * a + f12 * c
        nb = f11 * b + f12 * e
        nc = f21 * a + f22 * c
        ne = f21 * b + f22 * e
        r1 = abs(na) + abs(nb)
        r2 = abs(nc) + abs(ne)
        s = r1 if r1 > r2 else r2
        acc += np.log(s)
        a = na / s
        b = nb / s
        c = nc / s
        e = ne / s
        logs[k] = acc + _framed_log_norm(a, b, c, e, L, R)
    return logs


@njit(cache=True, nogil=True)
def _product_log_norm(factors, L, R):
    """(final log-norm, running supremum of partial log-norms)."""
    n = factors.shape[0]
    a = 1.0 + 0.0j
    b = 0.0j
    c = 0.0j
    e = 1.0 + 0.0j
    acc = 0.0
    sup = 0.0
    cur = 0.0
    for k in range(n):
        f11 = factors[k, 0, 0]
        f12 = factors[k, 0, 1]
        f21 = factors[k, 1, 0]
        f22 = factors[k, 1, 1]
        na = f11 * a + f12 * c
        nb = f11 * b + f12 * e
        nc = f21 * a + f22 * c
        ne = f21 * b + f22 * e
        r1 = abs(na) + abs(nb)
        r2 = abs(nc) + abs(ne)
        s = r1 if r1 > r2 else r2
        acc += np.log(s)
        a = na / s
        b = nb / s
        c = nc / s
        e = ne / s
        cur = acc + _framed_log_norm(a, b, c, e, L, R)
        if cur > sup:
            sup = cur
    return cur, sup


@njit(cache=True, nogil=True)
def _indexed_log_norm(table, idx, L, R):
    """Like _product_log_norm but with factors looked up from a small table,
    avoiding the (n, 2, 2) intermediate for finite-support measures."""
    n = idx.shape[0]
    a = 1.0 + 0.0j
    b = 0.0j
    c = 0.0j
    e = 1.0 + 0.0j
    acc = 0.0
    sup = 0.0
    cur = 0.0
    for k in range(n):
        j = idx[k]
        f11 = table[j, 0, 0]
        f12 = table[j, 0, 1]
        f21 = table[j, 1, 0]
        f22 = table[j, 1, 1]
        na = f11 * a + f12 * c
        nb = f11 * b + f12 * e
        nc = f21 * a + f22 * c
        ne = f21 * b + f22 * e
        r1 = abs(na) + abs(nb)
        r2 = abs(nc) + abs(ne)
        s = r1 if r1 > r2 else r2
        acc += np.log(s)
        a = na / s
        b = nb / s
        c = nc / s
        e = ne / s
        cur = acc + _framed_log_norm(a, b, c, e, L, R)
        if cur > sup:
            sup = cur
    return cur, sup


@njit(cache=True, nogil=True)
def _orbit_scan(factors, v0):
    """Projective orbit of v0: per-step renormalized vectors (max-norm 1)."""
    n = factors.shape[0]
    out = np.empty((n, 2), dtype=np.complex128)
    v1 = v0[0]
    v2 = v0[1]
    for k in range(n):
        w1 = factors[k, 0, 0] * v1 + factors[k, 0, 1] * v2
        w2 = factors[k, 1, 0] * v1 + factors[k, 1, 1] * v2
        s = abs(w1)
        s2 = abs(w2)
        if s2 > s:
            s = s2
        v1 = w1 / s
        v2 = w2 / s
        out[k, 0] = v1
        out[k, 1] = v2
    return out
