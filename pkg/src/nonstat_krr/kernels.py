"""Positive-definite kernels on a compact interval."""
from dataclasses import dataclass, field

import numpy as np

from . import _hot
from .errors import DomainError, NumericError

FAMILIES = ("gaussian", "spline", "periodic")


@dataclass(frozen=True)
class Kernel:
    """Kernel family plus parameters, restricted to ``[lo, hi]``.

    * ``gaussian``: ``exp(-((x - a) / width)**2)``
    * ``spline``: first (``min(u, v)``) or second order
      (``min**2 * (3 max - min) / 6``) spline kernel in ``u = x - lo``
    * ``periodic``: ``1 + sum_{j<=harmonics} cos(2 pi j (x - a) / period) / j**2``
    """

    family: str = "gaussian"
    width: float = 1.0
    order: int = 1
    period: float = 10.0
    harmonics: int = 5
    domain: tuple = (0.0, 10.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}, expected one of {FAMILIES}")
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise ValueError(f"kernel domain must satisfy lo < hi, got {self.domain}")
        object.__setattr__(self, "domain", (lo, hi))
        if self.family == "gaussian" and not self.width > 0:
            raise ValueError("gaussian width must be positive")
        if self.family == "spline" and self.order not in (1, 2):
            raise ValueError("spline order must be 1 or 2")
        if self.family == "periodic" and (not self.period > 0 or int(self.harmonics) < 1):
            raise ValueError("periodic kernel needs period > 0 and harmonics >= 1")

    @classmethod
    def gaussian(cls, width=1.0, domain=(0.0, 10.0)):
        return cls("gaussian", width=width, domain=domain)

    @classmethod
    def spline(cls, order=1, domain=(0.0, 10.0)):
        return cls("spline", order=order, domain=domain)

    @classmethod
    def periodic(cls, period=10.0, harmonics=5, domain=(0.0, 10.0)):
        return cls("periodic", period=period, harmonics=harmonics, domain=domain)

    @property
    def params(self):
        if self.family == "gaussian":
            return {"width": self.width}
        if self.family == "spline":
            return {"order": self.order}
        return {"period": self.period, "harmonics": self.harmonics}

    def _code(self):
        if self.family == "gaussian":
            return _hot.GAUSSIAN, self.width, 0.0
        if self.family == "spline":
            return _hot.SPLINE, float(self.order), self.domain[0]
        return _hot.PERIODIC, self.period, float(self.harmonics)

    def check_domain(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if x.size and (not np.all(np.isfinite(x)) or x.min() < lo or x.max() > hi):
            raise DomainError(f"input outside kernel domain [{lo}, {hi}]")
        return x

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params), "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, spec):
        params = dict(spec.get("params", {}))
        return cls(spec["family"], domain=tuple(spec.get("domain", (0.0, 10.0))), **params)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    points: np.ndarray
    entries: np.ndarray
    jitter: float = field(default=0.0)

    def __len__(self):
        return self.points.shape[0]


def eval(kernel, x, a):  # noqa: A001 - mirrors the math name
    """Scalar kernel value ``K(x, a)``."""
    kernel.check_domain([x, a])
    return float(_hot.cross(np.array([x], dtype=float), np.array([a], dtype=float), *kernel._code())[0, 0])


def cross(kernel, x, a):
    """Matrix ``K(x_i, a_j)``."""
    x = kernel.check_domain(np.atleast_1d(x))
    a = kernel.check_domain(np.atleast_1d(a))
    return _hot.cross(x, a, *kernel._code())


def gram(kernel, points):
    points = kernel.check_domain(np.atleast_1d(points))
    if points.size == 0:
        raise ValueError("gram needs at least one point")
    entries = _hot.gram(points, *kernel._code())
    points = points.copy()
    points.flags.writeable = False
    entries.flags.writeable = False
    return GramMatrix(points, entries)


def rkhs_norm_sq(gram_matrix, coeffs):
    """``c^T G c`` for ``f = sum c_i K(x_i, .)``; tiny negative rounding clamps to 0."""
    c = np.asarray(coeffs, dtype=float)
    g = gram_matrix.entries
    if c.shape != (g.shape[0],):
        raise ValueError(f"expected {g.shape[0]} coefficients, got shape {c.shape}")
    value = float(c @ g @ c)
    return max(value, 0.0)


def cholesky(matrix, shift=0.0):
    """Lower Cholesky factor of ``matrix + (shift + jitter) I``.

    Jitter starts at 0 and escalates by 10x from ``1e-12 * maxdiag`` to
    ``1e-6 * maxdiag``. Returns ``(L, jitter)``.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    maxdiag = float(np.max(np.abs(np.diag(a)))) if n else 0.0
    scale = maxdiag if maxdiag > 0 else 1.0
    ladder = [0.0] + [scale * 10.0 ** e for e in range(-12, -5)]
    diag = np.arange(n)
    base = a[diag, diag].copy()
    for jitter in ladder:
        a[diag, diag] = base + shift + jitter
        try:
            return np.linalg.cholesky(a), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericError(f"Cholesky failed even with jitter {ladder[-1]:.3g}")
