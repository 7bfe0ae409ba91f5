"""Quadrature, kernel integral operators and smoothness norms on a fixed grid.

Functions are carried as values on an equally spaced composite-Simpson grid.
At a jump of a step function the grid value is the mean of the two one-sided
limits; when the jump sits on a panel boundary (even node index) this makes
the plain composite rule identical to splitting the panels at the jump.
"""
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError, SingularityError


@dataclass(frozen=True)
class QuadratureGrid:
    lo: float = 0.0
    hi: float = 10.0
    count: int = 2001

    def __post_init__(self):
        if self.count < 3 or self.count % 2 == 0:
            raise ValueError(f"Simpson grid needs an odd node count >= 3, got {self.count}")
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")

    @functools.cached_property
    def nodes(self):
        x = np.linspace(self.lo, self.hi, self.count)
        x.flags.writeable = False
        return x

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.count - 1)

    @functools.cached_property
    def weights(self):
        w = simpson_weights(self.count, self.spacing)
        w.flags.writeable = False
        return w

    def index_of(self, x):
        """Node index equal to ``x`` (within 1e-9 spacing), else ``None``."""
        k = (x - self.lo) / self.spacing
        j = int(round(k))
        return j if abs(k - j) < 1e-9 and 0 <= j < self.count else None

    def aligned(self, points):
        """True when every point is a node on a Simpson panel boundary."""
        idx = [self.index_of(p) for p in points]
        return all(j is not None and j % 2 == 0 for j in idx)

    def refined(self):
        return QuadratureGrid(self.lo, self.hi, 2 * self.count - 1)


def simpson_weights(count, spacing):
    w = np.full(count, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (spacing / 3.0)


def segment_rule(a, b, spacing):
    """Composite Simpson nodes and weights on ``[a, b]`` with step at most ``spacing``."""
    panels = max(1, math.ceil((b - a) / (2.0 * spacing) - 1e-9))
    count = 2 * panels + 1
    return np.linspace(a, b, count), simpson_weights(count, (b - a) / (count - 1))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def sup(self):
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant function: ``value`` on each closed interval, 0 elsewhere.

    Where closed intervals share an endpoint the first listed piece wins.
    """

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(((float(a), float(b)), float(v)) for (a, b), v in self.pieces)
        ivs = sorted(iv for iv, _ in pieces)
        for (a, b) in ivs:
            if not a < b:
                raise ValueError(f"empty step interval [{a}, {b}]")
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise ValueError("step intervals overlap")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def zero(cls):
        return cls(())

    @property
    def breakpoints(self):
        return sorted({e for iv, _ in self.pieces for e in iv})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        done = np.zeros(x.shape, dtype=bool)
        for (a, b), v in self.pieces:
            sel = (x >= a) & (x <= b) & ~done
            out[sel] = v
            done |= sel
        return out

    def limits(self, x):
        """One-sided limits ``(h(x-), h(x+))``."""
        x = np.asarray(x, dtype=float)
        left = np.zeros(x.shape)
        right = np.zeros(x.shape)
        for (a, b), v in self.pieces:
            left = np.where((x > a) & (x <= b), v, left)
            right = np.where((x >= a) & (x < b), v, right)
        return left, right

    def on_grid(self, grid):
        x = grid.nodes
        vals = self(x)
        left, right = self.limits(x)
        interior = (x > grid.lo) & (x < grid.hi)
        jump = interior & (left != right)
        vals[jump] = 0.5 * (left[jump] + right[jump])
        # at the grid ends only the inside limit is seen by the quadrature
        vals[0], vals[-1] = right[0], left[-1]
        return GridFunction(grid, vals)

    def to_dict(self):
        return [{"interval": list(iv), "value": v} for iv, v in self.pieces]

    @classmethod
    def from_dict(cls, items):
        return cls(tuple((tuple(it["interval"]), it["value"]) for it in items))


def canonical_step():
    """1 on [0, 2], 0.3 on [8, 10], 0 elsewhere."""
    return StepFunction((((0.0, 2.0), 1.0), ((8.0, 10.0), 0.3)))


def integrate(f):
    return float(np.dot(f.grid.weights, f.values))


@functools.lru_cache(maxsize=4)
def grid_kernel_matrix(kernel, grid):
    k = kernels.cross(kernel, grid.nodes, grid.nodes)
    k.flags.writeable = False
    return k


def regression_values(kernel, h, x, spacing):
    """``int K(x, a) h(a) da`` at arbitrary points, one Simpson rule per step piece."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nodes, weights = [], []
    for (a, b), v in h.pieces:
        if v == 0.0:
            continue
        q, w = segment_rule(a, b, spacing)
        nodes.append(q)
        weights.append(w * v)
    if not nodes:
        return np.zeros(x.shape)
    return kernels.cross(kernel, x, np.concatenate(nodes)) @ np.concatenate(weights)


def build_regression_function(kernel, h, grid):
    """``mu(x) = int K(x, a) h(a) da`` at every node, integrating each step piece separately."""
    return GridFunction(grid, regression_values(kernel, h, grid.nodes, grid.spacing))


def operator_matrix(kernel, density, grid):
    """Discretized ``L_p``: ``M[i, j] = K(x_i, x_j) p(x_j) w_j``."""
    return grid_kernel_matrix(kernel, grid) * (density.pdf(grid.nodes) * grid.weights)[None, :]


def apply_operator(kernel, density, f):
    """``(L_p f)(x) = int K(x, a) f(a) p(a) da`` at every node."""
    grid = f.grid
    pw = density.pdf(grid.nodes) * grid.weights
    return GridFunction(grid, grid_kernel_matrix(kernel, grid) @ (pw * f.values))


def weighted_norm(f, density):
    p = density.pdf(f.grid.nodes)
    return math.sqrt(max(float(np.dot(f.grid.weights * p, f.values ** 2)), 0.0))


def density_bounds(density, grid):
    """Smallest and largest density value over the grid nodes."""
    p = density.pdf(grid.nodes)
    return float(p.min()), float(p.max())


def smoothness_norm_r1(h, density, grid):
    """``sqrt(int h^2 / p)``, the ``L_p^{-1}`` smoothness norm of ``mu = int K h``."""
    total = 0.0
    for (a, b), v in h.pieces:
        if v == 0.0:
            continue
        x, w = segment_rule(a, b, grid.spacing)
        p = density.pdf(x)
        with np.errstate(divide="ignore", over="ignore"):
            inv = 1.0 / p
        if np.any(p <= 0) or not np.all(np.isfinite(inv)):
            raise SingularityError(f"density vanishes on the step piece [{a}, {b}]")
        total += v * v * float(np.dot(w, inv))
    if not math.isfinite(total):
        raise SingularityError("smoothness integral overflowed")
    return math.sqrt(total)


@dataclass(frozen=True)
class SpectralNorm:
    value: float
    r: float
    excluded_fraction: float
    n_excluded: int
    floor: float

    @property
    def ill_posed(self):
        return self.excluded_fraction > 0.01

    def __float__(self):
        return self.value


def symmetrized_operator(kernel, density, grid):
    """``D^1/2 K D^1/2`` with ``D = diag(p w)``; similar to the discretized ``L_p``."""
    d = np.sqrt(density.pdf(grid.nodes) * grid.weights)
    a = d[:, None] * grid_kernel_matrix(kernel, grid) * d[None, :]
    return 0.5 * (a + a.T), d


def smoothness_norm_general(mu, density, kernel, r=1.0, rel_floor=1e-10):
    """Spectral ``||L_p^{-r} mu||_p`` on the grid.

    Eigencomponents with eigenvalue below ``rel_floor * lambda_max`` are
    dropped; the share of ``||mu||_p^2`` they carry is reported and flagged
    when it exceeds 1%.
    """
    if not 0.5 < r <= 1.0:
        raise ValueError(f"smoothness index r must lie in (1/2, 1], got {r}")
    p = density.pdf(mu.grid.nodes)
    if np.any(p <= 0):
        raise SingularityError("density must be strictly positive on the grid")
    a, d = symmetrized_operator(kernel, density, mu.grid)
    lam, vec = np.linalg.eigh(a)
    coords = vec.T @ (d * mu.values)
    floor = rel_floor * float(lam.max())
    keep = lam > floor
    mass = float(np.sum(coords ** 2))
    excluded = float(np.sum(coords[~keep] ** 2)) / mass if mass > 0 else 0.0
    value = math.sqrt(float(np.sum(coords[keep] ** 2 * lam[keep] ** (-2.0 * r))))
    result = SpectralNorm(value, r, excluded, int(np.sum(~keep)), floor)
    if result.ill_posed:
        warnings.warn(f"{excluded:.2%} of the spectral mass lies below the eigenvalue floor",
                      RuntimeWarning, stacklevel=2)
    return result


def data_free_limit(mu, schedule, t, gamma, kernel):
    """Population ridge solution ``(L_t + gamma I)^{-1} L_t mu`` under the average density."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    m = operator_matrix(kernel, schedule.average_density(t), mu.grid)
    rhs = m @ mu.values
    m[np.diag_indices_from(m)] += gamma
    try:
        v = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"data-free limit system is singular: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise NumericError("data-free limit produced non-finite values")
    return GridFunction(mu.grid, v)
