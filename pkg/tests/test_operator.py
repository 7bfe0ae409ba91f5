import math
import warnings

import numpy as np
import pytest
import scipy.integrate
from scipy.special import erf

from nonstat_krr import operator as op
from nonstat_krr.densities import PiecewiseConstant, SamplingSchedule, TruncatedGaussian
from nonstat_krr.errors import SingularityError
from nonstat_krr.kernels import Kernel
from nonstat_krr.operator import GridFunction, QuadratureGrid, StepFunction

GRID = QuadratureGrid()
K = Kernel.gaussian(1.0)
H = op.canonical_step()


def _mu_closed(x):
    # int_0^2 e^{-(x-a)^2} da + 0.3 int_8^10 e^{-(x-a)^2} da
    c = math.sqrt(math.pi) / 2
    return c * (erf(x) - erf(x - 2)) + 0.3 * c * (erf(x - 8) - erf(x - 10))


def test_simpson_exact_for_cubics():
    f = GridFunction.from_callable(QuadratureGrid(0, 10, 11), lambda x: x**3 - 2 * x)
    assert op.integrate(f) == pytest.approx(2500 - 100, rel=1e-14)


def test_grid_validation():
    with pytest.raises(ValueError):
        QuadratureGrid(0, 10, 2000)
    assert GRID.index_of(2.0) == 400 and GRID.index_of(2.0025) is None
    assert GRID.aligned([0.0, 2.0, 8.0, 10.0])


def test_regression_function_closed_form():
    mu = op.build_regression_function(K, H, GRID)
    np.testing.assert_allclose(mu.values, _mu_closed(GRID.nodes), atol=1e-11)


def test_regression_function_against_quad():
    x = 3.7
    want = scipy.integrate.quad(lambda a: math.exp(-(x - a) ** 2), 0, 2)[0] \
        + 0.3 * scipy.integrate.quad(lambda a: math.exp(-(x - a) ** 2), 8, 10)[0]
    assert op.regression_values(K, H, [x], GRID.spacing)[0] == pytest.approx(want, abs=1e-10)


def test_step_function_semantics():
    assert H(2.0) == 1.0 and H(8.0) == 0.3 and H(5.0) == 0.0
    g = H.on_grid(GRID)
    assert g.values[GRID.index_of(2.0)] == 0.5
    assert g.values[GRID.index_of(8.0)] == pytest.approx(0.15)
    assert op.integrate(g) == pytest.approx(2.6, rel=1e-14)
    with pytest.raises(ValueError):
        StepFunction((((0.0, 3.0), 1.0), ((2.0, 4.0), 1.0)))
    assert StepFunction.from_dict(H.to_dict()) == H


def test_operator_is_linear(rng):
    p = TruncatedGaussian(4.0, 2.0)
    f = GridFunction(GRID, rng.normal(size=GRID.count))
    g = GridFunction(GRID, rng.normal(size=GRID.count))
    lhs = op.apply_operator(K, p, f * 2.0 + g)
    rhs = op.apply_operator(K, p, f) * 2.0 + op.apply_operator(K, p, g)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-12)


def test_operator_matrix_matches_apply(rng):
    grid = QuadratureGrid(0, 10, 201)
    p = PiecewiseConstant.uniform()
    f = GridFunction(grid, rng.normal(size=grid.count))
    np.testing.assert_allclose(op.operator_matrix(K, p, grid) @ f.values,
                               op.apply_operator(K, p, f).values, atol=1e-13)


def test_weighted_norm_uniform():
    f = GridFunction.from_callable(GRID, lambda x: x)
    assert op.weighted_norm(f, PiecewiseConstant.uniform()) == pytest.approx(
        math.sqrt(100 / 3), rel=1e-12)


def test_smoothness_r1_uniform_and_quad():
    assert op.smoothness_norm_r1(H, PiecewiseConstant.uniform(), GRID) ** 2 == pytest.approx(21.8)
    p = TruncatedGaussian(5.0, 3.0)
    want = scipy.integrate.quad(lambda x: 1 / p.pdf(x), 0, 2)[0] \
        + 0.09 * scipy.integrate.quad(lambda x: 1 / p.pdf(x), 8, 10)[0]
    assert op.smoothness_norm_r1(H, p, GRID) ** 2 == pytest.approx(want, abs=1e-10)


def test_smoothness_r1_singular_density():
    p = PiecewiseConstant((0.0, 5.0, 10.0), (0.0, 1.0))
    with pytest.raises(SingularityError):
        op.smoothness_norm_r1(H, p, GRID)


def test_spectral_norm_tracks_r1():
    grid = QuadratureGrid(0, 10, 401)
    p = PiecewiseConstant.uniform()
    mu = op.build_regression_function(K, H, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = op.smoothness_norm_general(mu, p, K, r=1.0)
    assert res.value == pytest.approx(op.smoothness_norm_r1(H, p, grid), rel=0.05)
    assert 0.0 <= res.excluded_fraction < 0.01
    with pytest.raises(ValueError):
        op.smoothness_norm_general(mu, p, K, r=0.4)


def test_spectral_norm_flags_ill_posed_target():
    grid = QuadratureGrid(0, 10, 201)
    rough = GridFunction.from_callable(grid, lambda x: np.sign(np.sin(7 * x)))
    with pytest.warns(RuntimeWarning):
        res = op.smoothness_norm_general(rough, PiecewiseConstant.uniform(), K)
    assert res.ill_posed


def test_data_free_limit_converges_as_gamma_shrinks():
    sched = SamplingSchedule(((PiecewiseConstant.uniform(), 100),))
    mu = op.build_regression_function(K, H, GRID)
    p = sched.average_density(100)
    d = [op.weighted_norm(op.data_free_limit(mu, sched, 100, g, K) - mu, p)
         for g in (1e-1, 1e-2, 1e-3)]
    assert d[0] > d[1] > d[2]
    with pytest.raises(ValueError):
        op.data_free_limit(mu, sched, 100, 0.0, K)
