import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glmequiv.errors import ConfigError, DomainError, ShapeError
from glmequiv.funcspace import (
    GridFunction,
    block_slices,
    bump,
    design,
    holder_lags,
    holder_quotient,
    local_rescale,
    neighborhood_contains,
    rates,
    sample_holder,
)


def _gamma_oracle(n, beta, kappa0=1):
    mp.mp.dps = 40
    return float(kappa0 * (mp.mpf(n) / mp.log(n)) ** (-mp.mpf(beta) / (2 * mp.mpf(beta) + 1)))


def _brute_quotient(vals, alpha):
    n = vals.size
    t = design(n)
    d = np.abs(vals[:, None] - vals[None, :])
    dt = np.abs(t[:, None] - t[None, :])
    mask = dt > 0
    return float(np.max(d[mask] / dt[mask] ** alpha))


# -- rates -------------------------------------------------------------------------
def test_rates_gamma_n_matches_high_precision():
    r = rates(1000, 1.0, 1.0)
    assert r.gamma_n == pytest.approx(_gamma_oracle(1000, 1.0), rel=1e-13)
    assert r.gamma_n == pytest.approx(0.190449, abs=5e-7)
    assert r.delta_n == r.gamma_n


def test_rates_gamma_star_matches_high_precision():
    r = rates(1024, 0.75, 1.0, kappa0_star=1.0)
    mp.mp.dps = 40
    oracle = float((mp.mpf(1024) / mp.log(1024)) ** mp.mpf(-0.5))
    assert r.gamma_star == pytest.approx(oracle, rel=1e-13)
    assert r.gamma_star == pytest.approx(0.082274, abs=5e-7)


def test_global_gamma_star_eventually_below_gamma_n():
    # the n-based radius shrinks faster than gamma_n, so only the block-based one dominates it
    r = rates(2**16, 1.0)
    assert r.gamma_star < r.gamma_n <= r.gamma_star_local


def test_rates_default_kappa0_star():
    assert rates(4096, 0.75, 2.0).kappa0_star == 8.0


@pytest.mark.parametrize("beta", [0.75, 1.0])
def test_rates_block_relations_and_ordering(beta):
    prev = math.inf
    for k in range(8, 17):
        r = rates(2**k, beta)
        assert all(r.block_checks().values()), (k, r.block_checks())
        assert r.gamma_n < prev
        assert r.gamma_n <= r.gamma_star_local
        assert sum(r.n_k) == r.n and len(r.n_k) == r.m
        prev = r.gamma_n


def test_rates_rejects_small_beta():
    with pytest.raises(DomainError):
        rates(1024, 0.5)
    with pytest.raises(DomainError):
        rates(4, 0.75)


def test_block_slices_match_interval_membership():
    n, m = 1000, 7
    t = design(n)
    for k, s in enumerate(block_slices(n, m), start=1):
        idx = np.arange(n)[s]
        assert np.all((t[idx] > (k - 1) / m) & (t[idx] <= k / m))
    assert sum(s.stop - s.start for s in block_slices(n, m)) == n


# -- sample_holder -----------------------------------------------------------------
def test_sample_holder_example():
    f = sample_holder(0.75, 1.0, (-1.0, 1.0), 256, seed=7)
    assert f.in_range((-1.0, 1.0))
    assert holder_quotient(f, 0.75) <= 1.0 * (1 + 1e-9)
    # cross-check the lag scan against the all-pairs oracle
    assert holder_quotient(f, 0.75) == pytest.approx(_brute_quotient(f.values, 0.75), rel=1e-12)


def test_sample_holder_deterministic():
    a = sample_holder(0.9, 2.0, (0.0, 3.0), 128, seed=99)
    b = sample_holder(0.9, 2.0, (0.0, 3.0), 128, seed=99)
    assert np.array_equal(a.values, b.values)
    assert a.digest() == b.digest()


def test_sample_holder_zero_constant():
    f = sample_holder(1.0, 0.0, (0.0, 2.0), 16, seed=1)
    assert np.array_equal(f.values, np.ones(16))
    assert "constant" in f.flags


def test_sample_holder_validation():
    with pytest.raises(ConfigError):
        sample_holder(3.0, 1.0, (0, 1), 64, seed=0)
    with pytest.raises(ConfigError):
        sample_holder(0.75, -1.0, (0, 1), 64, seed=0)
    with pytest.raises(ConfigError):
        sample_holder(0.75, 1.0, (1, 0), 64, seed=0)


@settings(max_examples=25, deadline=None)
@given(
    beta=st.floats(0.55, 1.9),
    L=st.floats(0.1, 5.0),
    seed=st.integers(0, 2**32 - 1),
    n=st.sampled_from([64, 256, 1024]),
)
def test_sample_holder_stays_in_class(beta, L, seed, n):
    f = sample_holder(beta, L, (-1.0, 2.0), n, seed=seed)
    assert f.in_range((-1.0, 2.0))
    assert holder_quotient(f, beta) <= L * 1.01


def test_local_rescale_sup_norm():
    # pieces of f - f0 rescaled by gamma_star stay in the unit ball when ||f - f0|| <= gamma_n
    for n in (256, 1024, 4096):
        r = rates(n, 0.75)
        f0 = sample_holder(0.75, 0.5, (-0.5, 0.5), n, seed=n)
        f = f0 + bump(n, 0.4, r.gamma_n, 0.75, 0.5)
        assert neighborhood_contains(f0, f, r.gamma_n)
        for piece in local_rescale(f - f0, r.m, r.gamma_star_local):
            assert np.max(np.abs(piece), initial=0.0) <= 1.0


# -- holder_quotient ---------------------------------------------------------------
def test_holder_quotient_constant_and_identity():
    assert holder_quotient(GridFunction(np.full(50, 3.0)), 0.75) == 0.0
    f = GridFunction.from_callable(lambda t: t, 200)
    assert holder_quotient(f, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_holder_quotient_sqrt():
    n = 400
    f = GridFunction.from_callable(np.sqrt, n)
    q = holder_quotient(f, 0.5)
    assert 0.9 <= q <= 1.01
    assert q == pytest.approx(_brute_quotient(f.values, 0.5), rel=1e-12)


def test_holder_quotient_second_order():
    # beta = 1.5 takes one difference first: for t^2 / 2 the derivative is t, quotient ~ |x-y|^{1/2}
    f = GridFunction.from_callable(lambda t: t * t / 2, 256)
    assert 0.9 <= holder_quotient(f, 1.5) <= 1.01


def test_holder_lags_subsampled_for_large_n():
    lags = holder_lags(10_000)
    assert lags[0] == 1 and lags[-1] == 9999
    assert lags.size < 1200
    assert np.array_equal(holder_lags(100), np.arange(1, 100))


# -- neighborhoods and GridFunction --------------------------------------------------
def test_neighborhood_contains_examples():
    f0 = sample_holder(0.75, 1.0, (-1.0, 1.0), 128, seed=3)
    g = 0.123
    assert neighborhood_contains(f0, f0, g)
    assert neighborhood_contains(f0, f0 + g, g)
    assert not neighborhood_contains(f0, f0 + 1.01 * g, g)


def test_grid_function_arithmetic_and_shapes():
    a = GridFunction(np.arange(4.0))
    b = GridFunction(np.ones(4))
    assert np.array_equal((a + b).values, np.arange(1.0, 5.0))
    assert np.array_equal((2 * a - b).values, 2 * np.arange(4.0) - 1)
    assert np.array_equal((-a).values, -np.arange(4.0))
    with pytest.raises(ShapeError):
        a + GridFunction(np.ones(5))
    with pytest.raises(ValueError):
        a.values[0] = 10.0
    with pytest.raises(DomainError):
        GridFunction(np.array([1.0, np.nan]))


def test_grid_function_csv_roundtrip(tmp_path):
    f = sample_holder(0.8, 1.0, (-1.0, 1.0), 32, seed=5)
    text = f.to_csv(tmp_path / "f.csv")
    g = GridFunction.from_csv(tmp_path / "f.csv")
    assert np.array_equal(f.values, g.values)
    assert g.beta == 0.8 and g.theta0 == (-1.0, 1.0)
    assert text.splitlines()[1] == "i,t_i,value"


def test_bump_height_and_class():
    for n in (512, 4096):
        r = rates(n, 0.75)
        h = bump(n, 0.5, r.gamma_n, 0.75, 0.5)
        assert h.sup_norm() == pytest.approx(r.gamma_n, rel=1e-3)
        assert holder_quotient(h, 0.75) <= 0.5 * 1.01
