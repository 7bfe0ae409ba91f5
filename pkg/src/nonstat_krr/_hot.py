"""Inner loops: kernel matrices and the bordered Cholesky row.

Each kernel has a numba variant (``*_nb``) and a numpy variant (``*_np``);
the public name is bound to one of them by :func:`nonstat_krr._accel.pick`.
Family codes: 0 gaussian(width), 1 spline(order, lo), 2 periodic(period, harmonics).
"""
import math

import numpy as np
import scipy.linalg

from ._accel import jit, pick

GAUSSIAN, SPLINE, PERIODIC = 0, 1, 2


def _entry(x, a, family, p0, p1):
    if family == 0:
        d = (x - a) / p0
        return math.exp(-d * d)
    if family == 1:
        u = x - p1
        v = a - p1
        m = min(u, v)
        if p0 == 1.0:
            return m
        big = max(u, v)
        return m * m * (3.0 * big - m) / 6.0
    s = 1.0
    w = 2.0 * math.pi * (x - a) / p0
    for j in range(1, int(p1) + 1):
        s += math.cos(j * w) / (j * j)
    return s


_entry_nb = jit(_entry)

if _entry_nb is not None:

    @jit
    def _cross_impl(x, a, family, p0, p1):
        out = np.empty((x.shape[0], a.shape[0]))
        for i in range(x.shape[0]):
            for j in range(a.shape[0]):
                out[i, j] = _entry_nb(x[i], a[j], family, p0, p1)
        return out

    @jit
    def _gram_impl(x, family, p0, p1):
        n = x.shape[0]
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                v = _entry_nb(x[i], x[j], family, p0, p1)
                out[i, j] = v
                out[j, i] = v
        return out

    @jit
    def _forward_row_impl(L, n, k, out):
        out[0] = k[0] / L[0, 0]
        for j in range(1, n):
            # contiguous row slice, so np.dot dispatches to BLAS
            out[j] = (k[j] - np.dot(L[j, :j], out[:j])) / L[j, j]
        return out

else:  # pragma: no cover
    _cross_impl = _gram_impl = _forward_row_impl = None


def cross_nb(x, a, family, p0, p1):
    return _cross_impl(np.ascontiguousarray(x, dtype=float),
                       np.ascontiguousarray(a, dtype=float),
                       family, float(p0), float(p1))


def cross_np(x, a, family, p0, p1):
    x = np.asarray(x, dtype=float)[:, None]
    a = np.asarray(a, dtype=float)[None, :]
    if family == GAUSSIAN:
        d = (x - a) / p0
        return np.exp(-d * d)
    if family == SPLINE:
        u, v = x - p1, a - p1
        m = np.minimum(u, v)
        if p0 == 1.0:
            return np.broadcast_to(m, (x.shape[0], a.shape[1])).copy()
        return m * m * (3.0 * np.maximum(u, v) - m) / 6.0
    w = 2.0 * np.pi * (x - a) / p0
    out = np.ones(w.shape)
    for j in range(1, int(p1) + 1):
        out += np.cos(j * w) / (j * j)
    return out


def gram_nb(x, family, p0, p1):
    return _gram_impl(np.ascontiguousarray(x, dtype=float), family, float(p0), float(p1))


def gram_np(x, family, p0, p1):
    g = cross_np(x, x, family, p0, p1)
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def forward_row_nb(L, n, k):
    """Solve ``L[:n, :n] @ out = k`` for lower-triangular ``L``."""
    out = np.empty(n)
    return _forward_row_impl(L, n, np.ascontiguousarray(k, dtype=float), out)


def forward_row_np(L, n, k):
    return scipy.linalg.solve_triangular(L[:n, :n], k, lower=True, check_finite=False)


cross = pick(_cross_impl and cross_nb, cross_np)
gram = pick(_gram_impl and gram_nb, gram_np)
forward_row = pick(_forward_row_impl and forward_row_nb, forward_row_np)
