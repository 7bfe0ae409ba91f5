"""Scenario assembly, Monte Carlo runs, and the diagnostics built on them."""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import krr
from .densities import (
    PiecewiseConstant,
    SamplerState,
    SamplingSchedule,
    TruncatedGaussian,
    noise_stream,
    sample_chains,
    sample_path,
    split_seed,
)
from .errors import NumericError
from .kernels import Kernel
from .krr import Dataset, GammaSchedule
from .operator import (
    QuadratureGrid,
    StepFunction,
    build_regression_function,
    canonical_step,
    data_free_limit,
    regression_values,
    smoothness_norm_r1,
    weighted_norm,
)

TEST_FUNCTIONS = {
    "x": lambda x: x,
    "x2": lambda x: x * x,
    "sin": np.sin,
    "cos": np.cos,
    "bump": lambda x: np.exp(-((x - 5.0) ** 2)),
}


@dataclass(frozen=True)
class Scenario:
    kernel: Kernel
    h: StepFunction
    schedule: SamplingSchedule
    noise_var: float = 0.01
    gamma: GammaSchedule = field(default_factory=GammaSchedule)
    grid: QuadratureGrid = field(default_factory=QuadratureGrid)
    checkpoints: tuple = (1000, 2000, 3000)
    master_seed: int = 2024
    replicates: int = 20
    sampler: str = "independent"
    step_scale: float = None
    r: float = 1.0

    def __post_init__(self):
        cps = tuple(int(t) for t in self.checkpoints)
        if not cps or list(cps) != sorted(set(cps)) or cps[0] < 1:
            raise ValueError("checkpoints must be sorted, distinct and positive")
        if cps[-1] > self.schedule.total:
            raise ValueError(f"checkpoint {cps[-1]} exceeds schedule length {self.schedule.total}")
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if not 0.5 < self.r <= 1.0:
            raise ValueError("smoothness index r must lie in (1/2, 1]")
        object.__setattr__(self, "checkpoints", cps)
        SamplerState(self.sampler, 0, 0, self.step_scale)

    @property
    def regression_function(self):
        return build_regression_function(self.kernel, self.h, self.grid)

    def replicate_seed(self, k):
        return split_seed(self.master_seed, k)


def canonical_scenario(**overrides):
    """Three truncated Gaussians (centers 2, 5, 8; scale 1) on [0, 10], 1000 draws each."""
    support = (0.0, 10.0)
    phases = tuple((TruncatedGaussian(c, 1.0, support), 1000) for c in (2.0, 5.0, 8.0))
    base = Scenario(
        kernel=Kernel.gaussian(1.0, support),
        h=canonical_step(),
        schedule=SamplingSchedule(phases),
    )
    return replace(base, **overrides)


def uniform_scenario(total=4000, **overrides):
    support = (0.0, 10.0)
    base = canonical_scenario(
        schedule=SamplingSchedule(((PiecewiseConstant.uniform(*support), total),)),
        checkpoints=(total,),
    )
    return replace(base, **overrides)


def generate_data(scenario, seed, t=None):
    """Inputs from the schedule, outputs ``mu(x) + N(0, noise_var)``; deterministic in ``seed``."""
    t = scenario.schedule.total if t is None else t
    state = SamplerState(scenario.sampler, seed, 0, scenario.step_scale)
    x, _ = sample_path(scenario.schedule, state, t)
    mu = regression_values(scenario.kernel, scenario.h, x, scenario.grid.spacing)
    noise = noise_stream(seed).standard_normal(t)
    y = mu + math.sqrt(scenario.noise_var) * noise if scenario.noise_var > 0 else mu
    return Dataset(x, y)


@dataclass
class RunReport:
    """One record per (checkpoint, replicate) plus per-checkpoint grid estimates.

    ``timings`` holds wall-clock seconds per replicate; it is kept out of the
    serialized outputs so that reruns stay byte-identical.
    """

    scenario: Scenario
    mu: object
    records: list
    estimates: dict
    timings: list = field(default_factory=list)

    columns = ("replicate", "seed", "t", "gamma", "sup_error", "smoothness_norm", "dfl_distance")

    def series(self, t, key="sup_error"):
        return np.array([r[key] for r in self.records if r["t"] == t])

    def aggregate(self):
        out = []
        for t in self.scenario.checkpoints:
            row = {"t": t}
            for key in ("gamma", "sup_error", "smoothness_norm", "dfl_distance"):
                v = self.series(t, key)
                row[f"{key}_mean"] = float(np.mean(v))
                row[f"{key}_std"] = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
            out.append(row)
        return out

    def region_sup_error(self, t, region):
        """Per-replicate sup error restricted to grid nodes inside ``region``."""
        nodes = self.mu.grid.nodes
        sel = (nodes >= region[0]) & (nodes <= region[1])
        return np.max(np.abs(self.estimates[t][:, sel] - self.mu.values[sel]), axis=1)

    def rows(self):
        return [[r[c] for c in self.columns] for r in self.records]


def _checkpoint_diagnostics(scenario, mu):
    out = {}
    for t in scenario.checkpoints:
        gamma = krr.gamma_at(scenario.gamma, t)
        avg = scenario.schedule.average_density(t)
        smooth = smoothness_norm_r1(scenario.h, avg, scenario.grid)
        limit = data_free_limit(mu, scenario.schedule, t, gamma, scenario.kernel)
        out[t] = (gamma, smooth, weighted_norm(limit - mu, avg))
    return out


def _run_replicate(scenario, k, mu):
    start = time.perf_counter()
    seed = scenario.replicate_seed(k)
    last = scenario.checkpoints[-1]
    data = generate_data(scenario, seed, last)
    model = krr.KrrModel.empty(scenario.kernel)
    wanted = set(scenario.checkpoints)
    estimates = {}
    for i in range(last):
        model = krr.extend(model, data.inputs[i], data.outputs[i], krr.gamma_at(scenario.gamma, i + 1))
        if i + 1 in wanted:
            estimates[i + 1] = krr.predict(model, mu.grid.nodes)
    return seed, estimates, time.perf_counter() - start


def run_scenario(scenario, threads=1, diagnostics=True):
    """Stream every replicate through :func:`krr.extend` and score the checkpoints."""
    mu = scenario.regression_function
    diag = _checkpoint_diagnostics(scenario, mu) if diagnostics else {}
    work = lambda k: _run_replicate(scenario, k, mu)  # noqa: E731
    ks = range(scenario.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, ks))
    else:
        results = [work(k) for k in ks]
    records, timings = [], []
    estimates = {t: np.empty((scenario.replicates, mu.grid.count)) for t in scenario.checkpoints}
    for k, (seed, est, elapsed) in enumerate(results):
        timings.append(elapsed)
        for t in scenario.checkpoints:
            estimates[t][k] = est[t]
            gamma, smooth, dfl = diag.get(t, (krr.gamma_at(scenario.gamma, t), math.nan, math.nan))
            records.append({
                "replicate": k, "seed": seed, "t": t, "gamma": gamma,
                "sup_error": float(np.max(np.abs(est[t] - mu.values))),
                "smoothness_norm": smooth, "dfl_distance": dfl,
            })
    return RunReport(scenario, mu, records, estimates, timings)


def smoothness_trace(scenario, ts):
    """``(t, int h^2 / avg_density_t)`` for each ``t``."""
    out = []
    for t in ts:
        avg = scenario.schedule.average_density(int(t))
        out.append((int(t), smoothness_norm_r1(scenario.h, avg, scenario.grid) ** 2))
    return out


@dataclass(frozen=True)
class CovarianceRow:
    function: str
    position: int
    lag: int
    estimate: float
    stderr: float
    partial_sum: float
    partial_stderr: float


def covariance_diagnostic(schedule, mode="independent", functions=("x",), max_lag=50,
                          replicates=10_000, seed=0, positions=None, step_scale=None,
                          batch=1000):
    """Cross-replicate estimates of ``Cov(g(x_i), g(x_{i+k}))`` for ``k = 0 .. max_lag``.

    ``positions`` defaults to ``i = 1`` and the middle of the schedule. The
    standard error of each estimate is the replicate standard deviation of
    the centered products over ``sqrt(replicates)``. ``partial_stderr`` is
    the sum of per-lag standard errors over lags ``1..K``, a conservative
    noise scale for the absolute partial sums.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if replicates < 100:
        raise ValueError("covariance diagnostic needs at least 100 replicates")
    names = list(functions)
    unknown = [g for g in names if g not in TEST_FUNCTIONS]
    if unknown:
        raise ValueError(f"unknown test functions {unknown}; known: {sorted(TEST_FUNCTIONS)}")
    total = schedule.total
    if positions is None:
        positions = sorted({1, max(1, min(total // 2, total - max_lag))})
    positions = [int(i) for i in positions]
    for i in positions:
        if i < 1 or i + max_lag > total:
            raise ValueError(f"position {i} with max_lag {max_lag} exceeds schedule length {total}")
    # chain values at each position's window, gathered in seed batches
    windows = {i: np.empty((replicates, max_lag + 1)) for i in positions}
    seeds = [split_seed(seed, k) for k in range(replicates)]
    for lo in range(0, replicates, batch):
        chunk = seeds[lo:lo + batch]
        if mode == "independent":
            for i in positions:
                windows[i][lo:lo + len(chunk)] = sample_chains(
                    schedule, chunk, max_lag + 1, start=i - 1)
        else:
            end = max(positions) + max_lag
            xs = sample_chains(schedule, chunk, end, mode="metropolis", step_scale=step_scale)
            for i in positions:
                windows[i][lo:lo + len(chunk)] = xs[:, i - 1:i + max_lag]
    rows = []
    for name in names:
        g = TEST_FUNCTIONS[name]
        for i in positions:
            vals = g(windows[i])
            centered = vals - vals.mean(axis=0)
            partial, partial_se = 0.0, 0.0
            for k in range(max_lag + 1):
                prod = centered[:, 0] * centered[:, k]
                est = float(prod.sum() / (replicates - 1))
                se = float(prod.std(ddof=1) / math.sqrt(replicates))
                if k >= 1:
                    partial += abs(est)
                    partial_se += se
                rows.append(CovarianceRow(name, i, k, est, se, partial, partial_se))
    return rows


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    intercept: float
    r2: float
    theoretical: float
    ts: tuple
    mean_errors: tuple
    std_errors: tuple


def theoretical_rate(alpha, r):
    """``min(alpha (r - 1/2), 1/2 - alpha)``."""
    return min(alpha * (r - 0.5), 0.5 - alpha)


def rate_fit(scenario, ts=(250, 500, 1000, 2000, 4000), replicates=None, threads=1):
    """Least-squares slope of ``log(mean sup error)`` against ``log t``."""
    ts = tuple(sorted(int(t) for t in ts))
    replicates = scenario.replicates if replicates is None else replicates
    if len(ts) < 4:
        raise ValueError("rate fit needs at least 4 checkpoints")
    if ts[-1] < 10 * ts[0]:
        raise ValueError("rate fit checkpoints must span at least one decade")
    if replicates < 10:
        raise ValueError("rate fit needs at least 10 replicates")
    scen = replace(scenario, checkpoints=ts, replicates=replicates)
    report = run_scenario(scen, threads=threads, diagnostics=False)
    means = np.array([report.series(t).mean() for t in ts])
    stds = np.array([report.series(t).std(ddof=1) for t in ts])
    if np.any(means <= 0) or not np.all(np.isfinite(means)):
        raise NumericError("mean sup errors must be positive and finite for a log-log fit")
    lx, ly = np.log(ts), np.log(means)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateEstimate(float(slope), float(intercept), r2,
                        theoretical_rate(scenario.gamma.alpha, scenario.r),
                        ts, tuple(means.tolist()), tuple(stds.tolist()))
