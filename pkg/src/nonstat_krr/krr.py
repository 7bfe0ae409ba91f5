"""Kernel ridge regression: batch fit, streaming extension, gamma schedule.

The minimizer of ``mean((y - f(x))**2) + gamma ||f||_H^2`` is
``f = sum_i c_i K(x_i, .)`` with ``(G + t gamma I) c = y``.

Streaming keeps a Cholesky factor of ``G + s0 I`` in a growable buffer and
borders it with one row per new sample (O(t^2)). The factor's shift ``s0``
is allowed to go stale while ``t gamma(t)`` drifts; coefficients are then
recovered exactly by iterative refinement against the true system, with the
stale factor as preconditioner. The factor is rebuilt once the drift exceeds
``refactor_tol`` (relative), which bounds the refinement contraction factor.
"""
import functools
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _hot, kernels
from .errors import NumericError
from .io import write_csv

REFACTOR_TOL = 0.25


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("inputs and outputs must be 1-D arrays of equal length")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.inputs.shape[0]

    def head(self, t):
        return Dataset(self.inputs[:t], self.outputs[:t])


@dataclass(frozen=True)
class GammaSchedule:
    """``gamma(t) = gamma0 * t**-alpha`` with ``0 < alpha < 1/2``."""

    gamma0: float = 0.01
    alpha: float = 0.25

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must satisfy 0 < alpha < 1/2, got {self.alpha}")

    def __call__(self, t):
        return gamma_at(self, t)


def gamma_at(schedule, t):
    if t < 1:
        raise ValueError("t must be >= 1")
    return schedule.gamma0 * float(t) ** (-schedule.alpha)


class _Buffer:
    """Row storage shared by a lineage of streamed models.

    A model with ``n`` rows only reads the leading ``n x n`` block, so
    appending row ``n`` never disturbs earlier models of the same lineage.
    """

    def __init__(self, capacity, shift, jitter=0.0):
        capacity = max(int(capacity), 16)
        self.x = np.empty(capacity)
        self.y = np.empty(capacity)
        self.L = np.zeros((capacity, capacity))
        self.size = 0
        self.shift = shift
        self.jitter = jitter

    @property
    def capacity(self):
        return self.x.shape[0]

    def copy(self, n, capacity):
        new = _Buffer(max(capacity, n + 1), self.shift, self.jitter)
        new.x[:n] = self.x[:n]
        new.y[:n] = self.y[:n]
        new.L[:n, :n] = self.L[:n, :n]
        new.size = n
        return new


class KrrModel:
    """Fitted estimator over ``t`` support points. Treat as immutable."""

    def __init__(self, kernel, buf, n, gamma):
        self.kernel = kernel
        self.gamma = float(gamma)
        self._buf = buf
        self._n = n

    @classmethod
    def empty(cls, kernel, gamma=1.0):
        return cls(kernel, _Buffer(16, 0.0), 0, gamma)

    @property
    def t(self):
        return self._n

    def __len__(self):
        return self._n

    @property
    def shift(self):
        return self._n * self.gamma

    @property
    def support(self):
        v = self._buf.x[: self._n]
        v.flags.writeable = False
        return v

    @property
    def targets(self):
        v = self._buf.y[: self._n]
        v.flags.writeable = False
        return v

    @property
    def chol(self):
        """Lower factor of ``G + (factor_shift) I`` used as solver/preconditioner."""
        return self._buf.L[: self._n, : self._n]

    @property
    def factor_shift(self):
        return self._buf.shift

    @functools.cached_property
    def _gram(self):
        return kernels.gram(self.kernel, self.support).entries

    @functools.cached_property
    def coeffs(self):
        c = self._solve()
        c.flags.writeable = False
        return c

    def _solve(self, max_iter=60):
        n = self._n
        if n == 0:
            return np.zeros(0)
        y = self.targets
        g = self._gram
        lc = np.ascontiguousarray(self.chol)
        s = self.shift

        def precond(r):
            z = scipy.linalg.solve_triangular(lc, r, lower=True, check_finite=False)
            return scipy.linalg.solve_triangular(lc, z, lower=True, trans="T", check_finite=False)

        c = precond(y)
        ynorm = float(np.linalg.norm(y)) or 1.0
        best_c, best_r, prev = c, math.inf, math.inf
        for _ in range(max_iter):
            r = y - (g @ c + s * c)
            rn = float(np.linalg.norm(r))
            if rn < best_r:
                best_c, best_r = c, rn
            # stop at the rounding floor or once refinement stalls
            if rn <= 1e-14 * ynorm or rn > 0.5 * prev:
                break
            prev = rn
            c = c + precond(r)
        if not np.all(np.isfinite(best_c)):
            raise NumericError("coefficient solve produced non-finite values")
        return best_c

    def residual_norm(self):
        """``||(G + t gamma I) c - y||``."""
        c = self.coeffs
        return float(np.linalg.norm(self._gram @ c + self.shift * c - self.targets))

    def spec_dict(self):
        return {"gamma": self.gamma, "t": self.t, "kernel": self.kernel.to_dict()}


def fit(data, kernel, gamma):
    t = len(data)
    if t == 0:
        raise ValueError("cannot fit an empty dataset")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    g = kernels.gram(kernel, data.inputs)
    shift = t * gamma
    L, jitter = kernels.cholesky(g.entries, shift)
    buf = _Buffer(t, shift + jitter, jitter)
    buf.x[:t] = g.points
    buf.y[:t] = data.outputs
    buf.L[:t, :t] = L
    buf.size = t
    model = KrrModel(kernel, buf, t, gamma)
    model.__dict__["_gram"] = g.entries
    return model


def _refactor(model, x_new, y_new, gamma_new):
    n = model.t + 1
    x = np.append(model.support, x_new)
    y = np.append(model.targets, y_new)
    g = kernels.gram(model.kernel, x)
    shift = n * gamma_new
    L, jitter = kernels.cholesky(g.entries, shift)
    buf = _Buffer(max(2 * n, model._buf.capacity), shift + jitter, jitter)
    buf.x[:n] = x
    buf.y[:n] = y
    buf.L[:n, :n] = L
    buf.size = n
    return KrrModel(model.kernel, buf, n, gamma_new)


def extend(model, x_new, y_new, gamma_new, refactor_tol=REFACTOR_TOL):
    """Model for the dataset with ``(x_new, y_new)`` appended, regularized by ``gamma_new``."""
    if not gamma_new > 0:
        raise ValueError("gamma must be positive")
    x_new = float(model.kernel.check_domain(x_new))
    n = model.t
    new_shift = (n + 1) * gamma_new
    buf = model._buf
    if n == 0 or abs(new_shift - buf.shift) > refactor_tol * buf.shift:
        return _refactor(model, x_new, y_new, gamma_new)
    if buf.size != n or buf.capacity <= n:
        buf = buf.copy(n, 2 * buf.capacity if buf.capacity <= n else buf.capacity)
    k = kernels.cross(model.kernel, model.support, [x_new])[:, 0]
    row = _hot.forward_row(buf.L, n, k)
    kxx = kernels.cross(model.kernel, [x_new], [x_new])[0, 0]
    d2 = kxx + buf.shift - float(row @ row)
    if not d2 > 1e-14 * (kxx + buf.shift):
        return _refactor(model, x_new, y_new, gamma_new)
    buf.L[n, :n] = row
    buf.L[n, n] = math.sqrt(d2)
    buf.x[n] = x_new
    buf.y[n] = y_new
    buf.size = n + 1
    return KrrModel(model.kernel, buf, n + 1, gamma_new)


def predict(model, x):
    """``sum_i c_i K(x_i, x)``; scalar in, scalar out."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if model.t == 0:
        model.kernel.check_domain(xs)
        out = np.zeros(xs.shape)
    else:
        out = kernels.cross(model.kernel, xs, model.support) @ model.coeffs
    return float(out[0]) if np.ndim(x) == 0 else out


def sup_error(model, mu, region=None):
    """Max over grid nodes (optionally within ``region=(a, b)``) of ``|mu_hat - mu|``."""
    nodes = mu.grid.nodes
    sel = np.ones(nodes.shape, dtype=bool)
    if region is not None:
        sel = (nodes >= region[0]) & (nodes <= region[1])
    err = np.abs(predict(model, nodes[sel]) - mu.values[sel])
    return float(err.max())


def objective(data, kernel, gamma, coeffs):
    """``mean((y - f(x))**2) + gamma c^T G c`` for ``f = sum c_i K(x_i, .)``."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (len(data),):
        raise ValueError(f"expected {len(data)} coefficients, got shape {c.shape}")
    g = kernels.gram(kernel, data.inputs)
    fitted = g.entries @ c
    return float(np.mean((data.outputs - fitted) ** 2)) + gamma * kernels.rkhs_norm_sq(g, c)


def model_to_csv(model, path):
    header = json.dumps(model.spec_dict(), sort_keys=True)
    write_csv(path, ["support", "coefficient"], zip(model.support, model.coeffs),
              preamble=[header])
