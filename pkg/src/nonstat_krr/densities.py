"""Sampling densities on an interval, schedules of densities, and samplers.

Every draw consumes exactly one pair of uniforms taken from a Philox
counter-based stream keyed by the sampler seed, so draw ``k`` of a chain is
reproducible from ``(seed, k)`` alone. Independent draws use inverse-CDF
transforms; mixtures pick a component with the first uniform and reuse its
rescaled remainder for nested mixtures. Metropolis draws use the first
uniform for a Gaussian proposal and the second for the accept test.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtr, ndtri

GOLDEN64 = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
SQRT2PI = math.sqrt(2.0 * math.pi)


def split_seed(master, k):
    """Seed of replicate ``k``: ``master xor (k * golden)`` modulo 2**64."""
    return (int(master) ^ ((int(k) * GOLDEN64) & MASK64)) & MASK64


def uniform_pairs(seed, start, n):
    """Uniform pairs for draws ``start .. start + n - 1``, shape ``(n, 2)``."""
    if n <= 0:
        return np.empty((0, 2))
    gen = Generator(Philox(key=int(seed) & MASK64, counter=int(start)))
    return gen.random(4 * n).reshape(n, 4)[:, :2]


def noise_stream(seed):
    """Generator for observation noise, disjoint from the input-location stream."""
    return Generator(Philox(key=(int(seed) & MASK64) | (1 << 64)))


class Density:
    """Normalized density on ``support``; vectorized ``pdf``/``cdf``/``ppf``."""

    support: tuple

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u, v=None):
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def second_moment(self):
        raise NotImplementedError

    def variance(self):
        m = self.mean()
        return self.second_moment() - m * m

    def is_nondegenerate(self):
        return True

    def _inside(self, x):
        lo, hi = self.support
        return (x >= lo) & (x <= hi)


def _check_support(support):
    lo, hi = (float(s) for s in support)
    if not lo < hi:
        raise ValueError(f"support must satisfy lo < hi, got {support}")
    return lo, hi


# normalizers this small underflow the density itself
MIN_TRUNCATED_MASS = 1e-290


@dataclass(frozen=True)
class TruncatedGaussian(Density):
    center: float
    scale: float
    support: tuple = (0.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "support", _check_support(self.support))
        if not self.scale > 0:
            raise ValueError("truncated gaussian scale must be positive")
        if not self._mass > MIN_TRUNCATED_MASS:
            raise ValueError("truncated gaussian puts (numerically) no mass on its support")

    @property
    def _bounds(self):
        lo, hi = self.support
        return (lo - self.center) / self.scale, (hi - self.center) / self.scale

    @property
    def _mass(self):
        a, b = self._bounds
        if a > 0:
            return float(ndtr(-a) - ndtr(-b))
        return float(ndtr(b) - ndtr(a))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.center) / self.scale
        dens = np.exp(-0.5 * z * z) / (SQRT2PI * self.scale * self._mass)
        return np.where(self._inside(x), dens, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), *self.support)
        a, _ = self._bounds
        z = (x - self.center) / self.scale
        if a > 0:
            return (ndtr(-a) - ndtr(-z)) / self._mass
        return (ndtr(z) - ndtr(a)) / self._mass

    def ppf(self, u, v=None):
        u = np.asarray(u, dtype=float)
        a, _ = self._bounds
        if a > 0:
            z = -ndtri(ndtr(-a) - u * self._mass)
        else:
            z = ndtri(ndtr(a) + u * self._mass)
        return np.clip(self.center + self.scale * z, *self.support)

    def mean(self):
        a, b = self._bounds
        phi = lambda z: math.exp(-0.5 * z * z) / SQRT2PI  # noqa: E731
        return self.center + self.scale * (phi(a) - phi(b)) / self._mass

    def second_moment(self):
        a, b = self._bounds
        phi = lambda z: math.exp(-0.5 * z * z) / SQRT2PI  # noqa: E731
        z_var = 1.0 + (a * phi(a) - b * phi(b)) / self._mass
        z_mean = (phi(a) - phi(b)) / self._mass
        m = self.center + self.scale * z_mean
        var = self.scale ** 2 * (z_var - z_mean ** 2)
        return var + m * m

    def to_dict(self):
        return {"kind": "truncated_gaussian", "center": self.center, "scale": self.scale}


@dataclass(frozen=True)
class PiecewiseConstant(Density):
    """Step density; ``values`` are rescaled so the density integrates to 1."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        v = np.asarray(self.values, dtype=float)
        if len(b) < 2 or len(v) != len(b) - 1:
            raise ValueError("piecewise density needs len(values) == len(breakpoints) - 1 >= 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("piecewise density values must be finite and nonnegative")
        total = float(np.sum(v * np.diff(b)))
        if not total > 0:
            raise ValueError("piecewise density has zero mass")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", tuple(float(x) for x in v / total))

    @classmethod
    def uniform(cls, lo=0.0, hi=10.0):
        return cls((lo, hi), (1.0,))

    @property
    def support(self):
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def _masses(self):
        return np.asarray(self.values) * np.diff(self.breakpoints)

    def _segment(self, x):
        b = np.asarray(self.breakpoints)
        return np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.values) - 1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        vals = np.asarray(self.values)[self._segment(x)]
        return np.where(self._inside(x), vals, 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), *self.support)
        b = np.asarray(self.breakpoints)
        k = self._segment(x)
        cum = np.concatenate(([0.0], np.cumsum(self._masses)))
        return np.minimum(cum[k] + np.asarray(self.values)[k] * (x - b[k]), 1.0)

    def ppf(self, u, v=None):
        u = np.asarray(u, dtype=float)
        b = np.asarray(self.breakpoints)
        masses = self._masses
        cum = np.concatenate(([0.0], np.cumsum(masses)))
        target = u * cum[-1]
        k = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(masses) - 1)
        # zero-mass segments cannot be selected: advance to the next positive one
        positive = np.flatnonzero(masses > 0)
        k = positive[np.clip(np.searchsorted(positive, k), 0, len(positive) - 1)]
        frac = np.clip((target - cum[k]) / masses[k], 0.0, 1.0)
        return b[k] + frac * (b[k + 1] - b[k])

    def mean(self):
        b = np.asarray(self.breakpoints)
        return float(np.sum(self._masses * 0.5 * (b[1:] + b[:-1])))

    def second_moment(self):
        b = np.asarray(self.breakpoints)
        return float(np.sum(np.asarray(self.values) * (b[1:] ** 3 - b[:-1] ** 3) / 3.0))

    def is_nondegenerate(self):
        return all(v > 0 for v in self.values)

    def to_dict(self):
        return {"kind": "piecewise_constant", "breakpoints": list(self.breakpoints),
                "values": list(self.values)}


@dataclass(frozen=True)
class Mixture(Density):
    components: tuple
    weights: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        w = tuple(float(x) for x in self.weights)
        if not comps or len(comps) != len(w):
            raise ValueError("mixture needs one weight per component")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be nonnegative and sum to 1, got sum {sum(w)!r}")
        supports = {c.support for c in comps}
        if len(supports) != 1:
            raise ValueError(f"mixture components must share one support, got {sorted(supports)}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def support(self):
        return self.components[0].support

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for w, c in zip(self.weights, self.components):
            if w > 0:
                out = out + w * c.pdf(x)
        return out

    def cdf(self, x):
        out = 0.0
        for w, c in zip(self.weights, self.components):
            if w > 0:
                out = out + w * c.cdf(x)
        return np.asarray(out, dtype=float)

    def ppf(self, u, v=None):
        """Component pick from ``u``; ``v`` drives the selected component."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float),
                                   np.asarray(u if v is None else v, dtype=float))
        shape = u.shape
        u, v = u.ravel(), v.ravel()
        w = np.asarray(self.weights)
        cum = np.cumsum(w)
        cum[-1] = 1.0
        k = np.minimum(np.searchsorted(cum, u, side="right"), len(w) - 1)
        positive = np.flatnonzero(w > 0)
        k = positive[np.clip(np.searchsorted(positive, k), 0, len(positive) - 1)]
        start = cum[k] - w[k]
        rest = np.clip((u - start) / w[k], 0.0, np.nextafter(1.0, 0.0))
        out = np.empty(u.shape)
        for j in np.unique(k):
            sel = k == j
            comp = self.components[j]
            if isinstance(comp, Mixture):
                out[sel] = comp.ppf(rest[sel], v[sel])
            else:
                out[sel] = comp.ppf(v[sel])
        return out.reshape(shape)

    def mean(self):
        return float(sum(w * c.mean() for w, c in zip(self.weights, self.components) if w > 0))

    def second_moment(self):
        return float(sum(w * c.second_moment()
                         for w, c in zip(self.weights, self.components) if w > 0))

    def is_nondegenerate(self):
        return any(w > 0 and c.is_nondegenerate() for w, c in zip(self.weights, self.components))

    def to_dict(self):
        return {"kind": "mixture", "weights": list(self.weights),
                "components": [c.to_dict() for c in self.components]}


def density_from_dict(spec, support):
    kind = spec["kind"]
    if kind == "truncated_gaussian":
        return TruncatedGaussian(float(spec["center"]), float(spec["scale"]), support)
    if kind == "piecewise_constant":
        return PiecewiseConstant(tuple(spec["breakpoints"]), tuple(spec["values"]))
    if kind == "uniform":
        return PiecewiseConstant.uniform(*support)
    if kind == "mixture":
        comps = [density_from_dict(c, support) for c in spec["components"]]
        return Mixture(tuple(comps), tuple(spec["weights"]))
    raise ValueError(f"unknown density kind {kind!r}")


def pdf(density, x):
    return density.pdf(x)


def convex_combine(components, weights):
    return Mixture(tuple(components), tuple(weights))


@dataclass(frozen=True)
class SamplingSchedule:
    """Ordered ``(density, count)`` phases; draw ``i`` (1-based) uses the phase containing ``i``."""

    phases: tuple

    def __post_init__(self):
        phases = tuple((d, int(n)) for d, n in self.phases)
        if not phases:
            raise ValueError("schedule needs at least one phase")
        for d, n in phases:
            if n < 1:
                raise ValueError("phase counts must be positive")
            if not d.is_nondegenerate():
                raise ValueError(f"schedule density {d!r} vanishes on part of its support")
        if len({d.support for d, _ in phases}) != 1:
            raise ValueError("all schedule densities must share one support")
        object.__setattr__(self, "phases", phases)

    @property
    def total(self):
        return sum(n for _, n in self.phases)

    @property
    def support(self):
        return self.phases[0][0].support

    @property
    def densities(self):
        return tuple(d for d, _ in self.phases)

    def _check(self, i, what):
        if not 1 <= i <= self.total:
            raise ValueError(f"{what} must lie in [1, {self.total}], got {i}")

    def phase_index(self, i):
        """0-based phase index governing 1-based draw ``i``."""
        self._check(i, "draw index")
        return int(self.phase_indices(i))

    def phase_indices(self, idx):
        edges = np.cumsum([n for _, n in self.phases])
        return np.searchsorted(edges, idx, side="left")

    def counts_up_to(self, t):
        self._check(t, "t")
        out, left = [], t
        for _, n in self.phases:
            take = min(n, left)
            out.append(take)
            left -= take
        return out

    def density_at(self, i):
        return self.phases[self.phase_index(i)][0]

    def average_density(self, t):
        counts = self.counts_up_to(t)
        return Mixture(self.densities, tuple(c / t for c in counts))

    def to_dict(self):
        return {"support": list(self.support),
                "phases": [{"density": d.to_dict(), "count": n} for d, n in self.phases]}


def density_at(schedule, i):
    return schedule.density_at(i)


def average_density(schedule, t):
    return schedule.average_density(t)


@dataclass(frozen=True)
class SamplerState:
    """Value-type sampler position: ``draw_count`` draws already taken from ``seed``.

    ``step_scale=None`` in metropolis mode means 2.4 standard deviations of the
    current target density.
    """

    mode: str = "independent"
    seed: int = 0
    draw_count: int = 0
    step_scale: Optional[float] = None
    current: Optional[float] = field(default=None)

    def __post_init__(self):
        if self.mode not in ("independent", "metropolis"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("metropolis step_scale must be positive")


def default_step(density):
    return 2.4 * math.sqrt(density.variance())


def _metropolis_step(density, cur, pair, step):
    prop = cur + step * ndtri(pair[..., 0])
    p_new = density.pdf(prop)
    p_old = density.pdf(cur)
    accept = pair[..., 1] * p_old < p_new
    return np.where(accept, prop, cur)


def sample(density, state):
    """One draw from ``density``; returns ``(x, new_state)``."""
    pair = uniform_pairs(state.seed, state.draw_count, 1)[0]
    if state.mode == "independent" or state.current is None:
        x = float(density.ppf(pair[0], pair[1]))
    else:
        step = state.step_scale or default_step(density)
        x = float(_metropolis_step(density, np.float64(state.current), pair, step))
    cur = x if state.mode == "metropolis" else None
    return x, replace(state, draw_count=state.draw_count + 1, current=cur)


def sample_chains(schedule, seeds, n, mode="independent", step_scale=None, start=0):
    """Draws ``start+1 .. start+n`` of one chain per seed, shape ``(len(seeds), n)``.

    Chains start fresh (independent draw from the target) at draw 1; a
    nonzero ``start`` is only meaningful in independent mode.
    """
    seeds = list(seeds)
    if mode == "metropolis" and start != 0:
        raise ValueError("metropolis chains must start at draw 0")
    pairs = np.stack([uniform_pairs(s, start, n) for s in seeds]) if seeds else np.empty((0, n, 2))
    out = np.empty((len(seeds), n))
    idx = np.arange(start + 1, start + n + 1)
    if n and (idx[0] < 1 or idx[-1] > schedule.total):
        raise ValueError(f"draws {idx[0]}..{idx[-1]} exceed schedule length {schedule.total}")
    if mode == "independent":
        phase = schedule.phase_indices(idx)
        for p in np.unique(phase):
            cols = np.flatnonzero(phase == p)
            out[:, cols] = schedule.phases[p][0].ppf(pairs[:, cols, 0], pairs[:, cols, 1])
        return out
    return _metropolis_run(schedule, pairs, idx, None, step_scale)


def _metropolis_run(schedule, pairs, idx, cur, step_scale):
    out = np.empty(pairs.shape[:2])
    phase = schedule.phase_indices(idx)
    steps = [step_scale or default_step(d) for d in schedule.densities]
    for j in range(len(idx)):
        d = schedule.phases[phase[j]][0]
        if cur is None:
            cur = d.ppf(pairs[:, j, 0], pairs[:, j, 1])
        else:
            cur = _metropolis_step(d, cur, pairs[:, j, :], steps[phase[j]])
        out[:, j] = cur
    return out


def sample_path(schedule, state, n):
    """``n`` consecutive draws of a single chain following ``schedule``."""
    if state.mode == "independent":
        xs = sample_chains(schedule, [state.seed], n, start=state.draw_count)[0]
        return xs, replace(state, draw_count=state.draw_count + n)
    idx = np.arange(state.draw_count + 1, state.draw_count + n + 1)
    if n and idx[-1] > schedule.total:
        raise ValueError(f"draw {idx[-1]} exceeds schedule length {schedule.total}")
    pairs = uniform_pairs(state.seed, state.draw_count, n)[None]
    cur = None if state.current is None else np.array([state.current])
    xs = _metropolis_run(schedule, pairs, idx, cur, state.step_scale)[0]
    last = float(xs[-1]) if n else state.current
    return xs, replace(state, draw_count=state.draw_count + n, current=last)
