"""Acceptance gate: one test per criterion, each at its stated tolerance and time budget.

Every test records a one-line PASS/FAIL verdict; the lines are printed in the
pytest terminal summary, or directly when this file is run as a script.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import erf

from nonstat_krr import cli, config, experiment, krr, operator as op
from nonstat_krr.densities import PiecewiseConstant, TruncatedGaussian, convex_combine
from nonstat_krr.kernels import Kernel

RESULTS = {}


def record(num, name, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed <= budget
    limit = f"of {budget:.0f}s" if math.isfinite(budget) else "no time limit"
    line = f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail} ({elapsed:.1f}s {limit})"
    RESULTS[num] = line
    print(line)
    assert ok, line


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# 1 -----------------------------------------------------------------------------------------
def test_01_streaming_matches_batch():
    def work():
        rng = np.random.default_rng(101)
        worst_coef, worst_res = 0.0, 0.0
        kernels_ = [Kernel.gaussian(1.0), Kernel.gaussian(0.5), Kernel.spline(1),
                    Kernel.periodic()]
        for i in range(50):
            t = int(rng.integers(1, 51))
            k = kernels_[i % len(kernels_)]
            sched = krr.GammaSchedule(float(10 ** rng.uniform(-3, -1)), float(rng.uniform(0.05, 0.45)))
            x = rng.uniform(0, 10, t)
            y = np.sin(x) + 0.1 * rng.normal(size=t)
            m = krr.KrrModel.empty(k)
            for j in range(t):
                m = krr.extend(m, x[j], y[j], sched(j + 1))
            batch = krr.fit(krr.Dataset(x, y), k, sched(t))
            worst_coef = max(worst_coef, float(np.max(np.abs(m.coeffs - batch.coeffs))))
            worst_res = max(worst_res, batch.residual_norm() / float(np.linalg.norm(y)))
        return worst_coef, worst_res

    (coef, res), dt = _timed(work)
    record(1, "streaming vs batch", coef <= 1e-8 and res <= 1e-10,
           f"max coef diff {coef:.2e} (<=1e-8), max rel residual {res:.2e} (<=1e-10)", dt, 10)


# 2 -----------------------------------------------------------------------------------------
def test_02_closed_forms():
    def work():
        grid = op.QuadratureGrid()
        mu = op.build_regression_function(Kernel.gaussian(1.0), op.canonical_step(), grid)
        mu1 = float(mu.values[grid.index_of(1.0)])
        gauss = op.integrate(op.GridFunction.from_callable(grid, lambda x: np.exp(-x * x)))
        return mu1, gauss

    (mu1, gauss), dt = _timed(work)
    want_mu = math.sqrt(math.pi) * erf(1.0)
    want_g = math.sqrt(math.pi) / 2 * erf(10.0)
    e1, e2 = abs(mu1 - want_mu), abs(gauss - want_g)
    record(2, "closed forms", e1 <= 1e-5 and e2 <= 1e-8,
           f"|mu(1)-sqrt(pi)erf(1)|={e1:.1e} (<=1e-5), |int e^-x^2 - ref|={e2:.1e} (<=1e-8)",
           dt, 1)


# 3 -----------------------------------------------------------------------------------------
def test_03_operator_identity():
    def work():
        grid = op.QuadratureGrid()
        k, h = Kernel.gaussian(1.0), op.canonical_step()
        mu = op.build_regression_function(k, h, grid)
        base = [TruncatedGaussian(c, 1.0) for c in (2.0, 5.0, 8.0)]
        rng = np.random.default_rng(303)
        dens = base + [convex_combine(base, tuple(rng.dirichlet(np.ones(3)))) for _ in range(2)]
        hv = h.on_grid(grid).values
        worst = 0.0
        for p in dens:
            f = op.GridFunction(grid, hv / p.pdf(grid.nodes))
            worst = max(worst, (op.apply_operator(k, p, f) - mu).sup())
        return worst

    worst, dt = _timed(work)
    record(3, "operator identity L_p[h/p] = mu", worst <= 1e-5,
           f"max sup deviation {worst:.1e} over 5 densities (<=1e-5)", dt, 30)


# 4 -----------------------------------------------------------------------------------------
def test_04_smoothness_trace():
    def work():
        scen = experiment.canonical_scenario()
        trace = dict(experiment.smoothness_trace(scen, [1000, 2000, 3000]))
        uni = op.smoothness_norm_r1(scen.h, PiecewiseConstant.uniform(), scen.grid) ** 2
        return trace, uni

    (tr, uni), dt = _timed(work)
    ok = tr[2000] < tr[1000] and tr[3000] < tr[1000] and abs(uni - 21.8) <= 1e-6
    record(4, "smoothness trace", ok,
           f"int h^2/p: t=1000 {tr[1000]:.3g}, 2000 {tr[2000]:.3g}, 3000 {tr[3000]:.3g}; "
           f"uniform {uni:.9f} (21.8 +/- 1e-6)", dt, 5)


# 5 -----------------------------------------------------------------------------------------
def test_05_canonical_run():
    scen = experiment.canonical_scenario(replicates=20)
    report, dt = _timed(lambda: experiment.run_scenario(scen, diagnostics=False))
    e1, e3 = report.series(1000).mean(), report.series(3000).mean()
    r1 = report.region_sup_error(1000, (6.0, 10.0)).mean()
    r3 = report.region_sup_error(3000, (6.0, 10.0)).mean()
    record(5, "canonical run (20 replicates)", e3 < e1 and r3 < 0.5 * r1,
           f"mean sup err t=1000 {e1:.4f} -> t=3000 {e3:.4f}; on [6,10] {r1:.4f} -> {r3:.4f} "
           f"(ratio {r3 / r1:.3f} < 0.5)", dt, 600)


# 6 -----------------------------------------------------------------------------------------
def test_06_rate_fit():
    scen = experiment.uniform_scenario(total=4000, replicates=20)
    est, dt = _timed(lambda: experiment.rate_fit(scen, (250, 500, 1000, 2000, 4000), 20))
    record(6, "rate fit (uniform)", est.slope < -0.05 and est.r2 > 0.8,
           f"slope {est.slope:.4f} (< -0.05), r2 {est.r2:.4f} (> 0.8), "
           f"proved exponent {est.theoretical}", dt, 900)


# 7 -----------------------------------------------------------------------------------------
def test_07_data_free_limit_bound():
    def work():
        scen = experiment.canonical_scenario()
        mu = scen.regression_function
        p = scen.schedule.average_density(3000)
        norm = op.smoothness_norm_r1(scen.h, p, scen.grid)
        rows = []
        for g in np.geomspace(1e-4, 1e-1, 10):
            lim = op.data_free_limit(mu, scen.schedule, 3000, float(g), scen.kernel)
            rows.append((float(g), op.weighted_norm(lim - mu, p), math.sqrt(g) * norm))
        return rows

    rows, dt = _timed(work)
    bound_ok = all(d <= b + 1e-4 for _, d, b in rows)
    mono = all(b[1] >= a[1] for a, b in zip(rows, rows[1:]))
    slack = min(b + 1e-4 - d for _, d, b in rows)
    record(7, "data-free limit bound", bound_ok and mono,
           f"bound holds at all 10 gammas (min slack {slack:.2e}), non-decreasing: {mono}",
           dt, 60)


# 8 -----------------------------------------------------------------------------------------
def test_08_covariance_diagnostic():
    def work():
        sched = experiment.uniform_scenario(total=3000).schedule
        ind = experiment.covariance_diagnostic(sched, "independent", ("x",), 50, 10_000, 2024)
        z = max(abs(r.estimate) / r.stderr for r in ind if r.lag >= 1)
        met = experiment.covariance_diagnostic(sched, "metropolis", ("x",), 50, 10_000, 2024)
        incs = []
        for i in sorted({r.position for r in met}):
            by_lag = {r.lag: r for r in met if r.position == i}
            inc = by_lag[50].partial_sum - by_lag[25].partial_sum
            se = by_lag[50].partial_stderr - by_lag[25].partial_stderr
            incs.append((i, inc, se))
        return z, incs

    (z, incs), dt = _timed(work)
    met_ok = all(inc < 2 * se for _, inc, se in incs)
    detail = "; ".join(f"i={i}: {inc:.3f} < 2x{se:.3f}" for i, inc, se in incs)
    record(8, "covariance diagnostic", z <= 3.0 and met_ok,
           f"independent max |est|/SE {z:.2f} (<=3); metropolis K=25->50 increment {detail}",
           dt, 300)


# 9 -----------------------------------------------------------------------------------------
def test_09_determinism(tmp_path):
    def work():
        trees = []
        for name in ("first", "second"):
            out = tmp_path / name
            assert cli.main(["run", "--output", str(out), "--threads", "1"]) == 0
            trees.append({p.name: p.read_bytes() for p in sorted(Path(out).iterdir())})
        return trees

    (a, b), dt = _timed(work)
    same = a == b and len(a) > 0
    cfg = config.canonical_config()
    record(9, "determinism", same,
           f"{len(a)} files byte-identical across two runs "
           f"(seed {cfg.scenario.master_seed}, {cfg.scenario.replicates} replicates)",
           dt, math.inf)


if __name__ == "__main__":  # pragma: no cover
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
