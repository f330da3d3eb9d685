import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from glmequiv.coupling import quantile_couple, s_n
from glmequiv.errors import ConfigError, ShapeError
from glmequiv.expfam import Bernoulli, GaussMean, Poisson, get_family
from glmequiv.experiments import (
    Kind,
    gaussian_shift_loglr,
    loglr,
    loglr_gauss_hetero,
    loglr_gauss_vst,
    loglr_glm,
    remainder_bounds,
    simulate_gauss_hetero,
    simulate_gauss_vst,
    simulate_glm,
    taylor_remainders,
)
from glmequiv.funcspace import GridFunction, sample_holder


def _pair(n=64, dist=0.1, seed=1, theta0=(-0.5, 0.5)):
    f0 = sample_holder(0.75, 1.0, theta0, n, seed=seed)
    shape = np.sin(2 * np.pi * f0.t)
    f = f0.with_values(f0.values + dist * shape / np.max(np.abs(shape)))
    return f0, f


# -- simulators ------------------------------------------------------------------
def test_simulate_glm_bernoulli():
    n = 100_000
    s = simulate_glm(Bernoulli(), GridFunction.constant(0.0, n), seed=4)
    assert set(np.unique(s.data)) <= {0.0, 1.0}
    assert abs(s.data.mean() - 0.5) <= 4 * math.sqrt(0.25 / n)


def test_simulate_glm_gauss_residuals():
    f = sample_holder(0.75, 1.0, (-1, 1), 5000, seed=2)
    s = simulate_glm(GaussMean(), f, seed=8)
    assert stats.kstest(s.data - f.values, "norm").pvalue > 0.01


def test_simulate_glm_deterministic():
    f = sample_holder(0.75, 1.0, (-1, 1), 300, seed=2)
    a = simulate_glm(Poisson(), f, seed=5)
    b = simulate_glm(Poisson(), f, seed=5)
    assert np.array_equal(a.data, b.data)
    assert a.sidecar() == b.sidecar()
    assert a.to_csv() == b.to_csv()


def test_gauss_hetero_matches_glm_for_gaussmean():
    f0 = sample_holder(0.75, 1.0, (-1, 1), 2000, seed=1)
    f = sample_holder(0.75, 1.0, (-1, 1), 2000, seed=2)
    a = simulate_gauss_hetero(GaussMean(), f0, f, seed=9)
    b = simulate_glm(GaussMean(), f, seed=9)
    assert np.allclose(a.data, b.data, rtol=0, atol=1e-12)


def test_gauss_hetero_poisson_variance():
    reps = 100_000
    zero = GridFunction.constant(0.0, 4)
    y = np.array([simulate_gauss_hetero(Poisson(), zero, zero, seed=(3, r)).data[0] for r in range(reps)])
    v = y.var(ddof=1)
    assert abs(v - 1.0) <= 4 * math.sqrt(2.0 / reps)


def test_gauss_hetero_residuals_standardized():
    fam = Poisson()
    f0 = sample_holder(0.75, 1.0, (-1, 1), 5000, seed=1)
    f = sample_holder(0.75, 1.0, (-1, 1), 5000, seed=3)
    s = simulate_gauss_hetero(fam, f0, f, seed=2)
    z = (s.data - f.values) * np.sqrt(fam.fisher_info(f0.values))
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_gauss_vst_poisson_mean_and_variance():
    reps = 100_000
    zero = GridFunction.constant(0.0, 1)
    y = np.array([simulate_gauss_vst(Poisson(), zero, seed=(7, r)).data[0] for r in range(reps)])
    se = y.std(ddof=1) / math.sqrt(reps)
    assert abs(y.mean() - 2.0) <= 4 * se
    assert abs(y.var(ddof=1) - 1.0) <= 4 * math.sqrt(2.0 / reps)


def test_gauss_vst_deterministic():
    f = GridFunction.constant(0.3, 50)
    assert np.array_equal(simulate_gauss_vst(Poisson(), f, 1).data, simulate_gauss_vst(Poisson(), f, 1).data)


def test_hetero_requires_matching_grids():
    with pytest.raises(ShapeError):
        simulate_gauss_hetero(Poisson(), GridFunction.constant(0.0, 5), GridFunction.constant(0.0, 6), 1)


# -- log-likelihood ratios --------------------------------------------------------------
@pytest.mark.parametrize("kind", list(Kind))
def test_loglr_zero_at_f0(kind):
    fam = Poisson()
    f0, _ = _pair()
    data = simulate_glm(fam, f0, 1).u if kind is Kind.GLM else np.random.default_rng(1).standard_normal(f0.n)
    assert loglr(kind, fam, f0, f0, data).value == 0.0


def test_loglr_glm_gauss_equals_shift():
    f0, f = _pair(n=128)
    s = simulate_glm(GaussMean(), f0, 3)
    assert loglr_glm(GaussMean(), f, f0, s).value == pytest.approx(gaussian_shift_loglr(f, f0, s.data), abs=1e-12)


def _normalization(kind, fam, f0, f, reps, seed):
    vals = np.empty(reps)
    for r in range(reps):
        if kind is Kind.GLM:
            data = simulate_glm(fam, f0, (seed, r))
        elif kind is Kind.GAUSS_HETERO:
            data = simulate_gauss_hetero(fam, f0, f0, (seed, r))
        else:
            data = simulate_gauss_vst(fam, f0, (seed, r))
        vals[r] = math.exp(loglr(kind, fam, f, f0, data).value)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(reps)


@pytest.mark.parametrize("kind", list(Kind))
def test_loglr_normalization(kind):
    f0, f = _pair(n=64, dist=0.1)
    m, se = _normalization(kind, Poisson(), f0, f, 10_000, 17)
    assert abs(m - 1.0) <= 3 * se


def test_loglr_hetero_antisymmetric():
    fam = Poisson()
    f0, f = _pair()
    y = simulate_gauss_hetero(fam, f0, f0, 2)
    a = loglr_gauss_hetero(fam, f, f0, y).value
    b = loglr_gauss_hetero(fam, f0, f, y).value
    assert a == pytest.approx(-b, abs=1e-12)


def test_loglr_vst_equals_hetero_for_gaussmean():
    fam = GaussMean()
    f0, f = _pair()
    y = np.random.default_rng(3).standard_normal(f0.n) + f0.values
    assert loglr_gauss_vst(fam, f, f0, y).value == pytest.approx(loglr_gauss_hetero(fam, f, f0, y).value, abs=1e-12)


@pytest.mark.parametrize("kind", list(Kind))
def test_loglr_chain_rule(kind):
    fam = Bernoulli()
    f0, f = _pair(seed=2)
    _, f1 = _pair(seed=2, dist=-0.05)
    if kind is Kind.GLM:
        data = simulate_glm(fam, f0, 4)
    elif kind is Kind.GAUSS_HETERO:
        data = simulate_gauss_hetero(fam, f0, f0, 4)
    else:
        data = simulate_gauss_vst(fam, f0, 4)
    direct = loglr(kind, fam, f, f1, data).value
    chained = loglr(kind, fam, f, f0, data).value + loglr(kind, fam, f0, f1, data).value
    assert direct == pytest.approx(chained, abs=1e-10)


def test_coupled_loglr_identity():
    # log L2 - log L1 = -S_n(h) + R on the coupled space, with h = f - f0
    fam = Poisson()
    f0, f = _pair(n=256, dist=0.05)
    run = quantile_couple(fam, f0.values, seed=12)
    h = f.values - f0.values
    log1 = loglr_glm(fam, f, f0, fam.u_stat(run.x_tilde)).value
    log2 = float(np.dot(h, run.normals) - 0.5 * np.sum(h * h * fam.fisher_info(f0.values)))
    r, _ = taylor_remainders(fam, f0, GridFunction(h), 1.0)
    assert log2 - log1 == pytest.approx(-s_n(run, h) + r, abs=1e-9)


# -- Taylor remainders -------------------------------------------------------------------
def test_taylor_remainders_zero_direction():
    f0, _ = _pair()
    assert taylor_remainders(Poisson(), f0, GridFunction(np.zeros(f0.n)), 0.3) == (0.0, 0.0)


def test_taylor_remainders_gaussmean():
    f0, _ = _pair(n=50)
    g = GridFunction(np.linspace(-1, 1, 50))
    r, r0 = taylor_remainders(GaussMean(), f0, g, 0.2)
    assert r == 0.0
    assert r0 == pytest.approx(0.5 * 0.04 * np.sum(g.values**2), rel=1e-14)


def test_taylor_remainders_poisson_high_precision():
    mp.mp.dps = 50
    h = mp.mpf("0.01")
    oracle = float(100 * (mp.exp(h) - 1 - h - h * h / 2))
    r, r0 = taylor_remainders(Poisson(), GridFunction.constant(0.0, 100), GridFunction.constant(1.0, 100), 0.01)
    assert oracle == pytest.approx(1.6708e-5, rel=1e-4)
    assert r == pytest.approx(oracle, rel=1e-12)
    assert r0 == pytest.approx(float(100 * (mp.exp(h) - 1 - h)), rel=1e-12)


def test_remainder_bounds_hold_and_validate():
    fam = Poisson()
    f0 = sample_holder(0.75, 1.0, fam.theta0, 512, seed=1)
    g = GridFunction(np.cos(3 * np.pi * f0.t))
    gam = 0.04
    r, r0 = taylor_remainders(fam, f0, g, gam)
    rb, r0b = remainder_bounds(fam, 1.0, gam, 512)
    assert abs(r) <= rb and abs(r0) <= r0b
    with pytest.raises(ConfigError):
        remainder_bounds(fam, 1.0, 0.2, 512)


def test_sample_u_for_gaussvar():
    fam = get_family("gaussvar")
    s = simulate_glm(fam, GridFunction.constant(-1.0, 10), 1)
    assert np.allclose(s.u, s.data**2 / 2)
