import math

import numpy as np
import pytest

from depqmc import gbm, lsm, qmc, stats
from depqmc.errors import DimensionError, DomainError


def test_payoff_examples():
    assert lsm.payoff(np.array([100.0, 110.0, 105.0]), 100.0) == 5.0
    assert lsm.payoff(np.array([90.0, 95.0]), 100.0) == 0.0
    assert abs(lsm.payoff(np.array([81.79]), 81.0) - 0.79) <= 1e-12


def test_laguerre_basis_at_zero():
    np.testing.assert_allclose(lsm.laguerre_basis(np.array([0.0]))[0],
                               np.ones(7))


def test_laguerre_basis_at_two():
    row = lsm.laguerre_basis(np.array([2.0]))[0]
    e = math.exp(-1.0)
    # L0 = e^-1, L1 = e^-1 (1 - 2) = -e^-1, L2 = e^-1 (1 - 4 + 2) = -e^-1
    np.testing.assert_allclose(
        row, [1.0, e, -e, -e, -e * e, -e * e, e * e], rtol=1e-12
    )


def test_laguerre_basis_damps_at_large_x():
    # e^(-100) * x^2/2 at x = 200 is ~7e-40: everything but the intercept
    # is exponentially damped into oblivion
    row = lsm.laguerre_basis(np.array([200.0]))[0]
    assert row[0] == 1.0
    assert np.all(np.abs(row[1:]) < 1e-39)
    assert np.all(np.abs(row[4:]) < 1e-75)


def simulate_paths(model, n_pth, n_gen, seed):
    d = model.dim
    U = qmc.pseudo_uniforms(n_pth, n_gen * d, seed=seed)
    Z = stats.normal_quantile(qmc.block_paths(U, n_pth, n_gen, d).cube)
    return gbm.simulate(model, Z)


def test_single_exercise_date_is_european():
    model = gbm.GbmModel(rate=0.001, sigma=[0.1], x0=[100.0])
    paths = simulate_paths(model, 200, 1, seed=0)
    spec = lsm.OptionSpec(strike=100.0, rate=0.001, times=np.array([1.0]))
    est = lsm.price_american(paths, spec)
    expect = float(np.exp(-0.001) * lsm.payoff(paths[:, 0, :], 100.0).mean())
    assert abs(est.price - expect) <= 1e-12
    assert est.n_pth == 200


def brute_force_deterministic_optimum(path, strike, rate, times):
    vals = [math.exp(-rate * t) * max(path[k].mean() - strike, 0.0)
            for k, t in enumerate(times)]
    return max(vals)


@pytest.mark.parametrize("strike", [80.0, 100.0, 105.0])
def test_zero_volatility_matches_deterministic_optimum(strike):
    model = gbm.GbmModel(rate=0.002, sigma=[0.0, 0.0], x0=[95.0, 107.0])
    paths = gbm.simulate(model, np.zeros((60, 12, 2)))
    times = np.arange(1.0, 13.0)
    spec = lsm.OptionSpec(strike=strike, rate=0.002, times=times)
    est = lsm.price_american(paths, spec, basis_scale=100.0)
    expect = brute_force_deterministic_optimum(paths[0], strike, 0.002, times)
    assert abs(est.price - expect) <= 1e-10


def test_monotone_in_strike():
    model = gbm.GbmModel(rate=0.0005, sigma=[0.0126, 0.0126], x0=[100.0, 90.0])
    paths = simulate_paths(model, 2000, 10, seed=1)
    times = np.arange(1.0, 11.0)
    prices = [
        lsm.price_american(
            paths, lsm.OptionSpec(strike=k, rate=0.0005, times=times),
            basis_scale=95.0,
        ).price
        for k in (85.0, 90.0, 95.0, 100.0)
    ]
    assert all(a >= b for a, b in zip(prices, prices[1:]))


def test_american_at_least_european():
    model = gbm.GbmModel(rate=0.0005, sigma=[0.0126], x0=[100.0])
    paths = simulate_paths(model, 4000, 20, seed=2)
    spec = lsm.OptionSpec(strike=101.0, rate=0.0005,
                          times=np.arange(1.0, 21.0))
    am = lsm.price_american(paths, spec, basis_scale=100.0)
    eu = lsm.european_price(paths, spec)
    combined = math.hypot(am.std_error, eu.std_error)
    assert am.price >= eu.price - 3.0 * combined


def test_exercise_invariant_under_path_relabeling():
    model = gbm.GbmModel(rate=0.0005, sigma=[0.0126], x0=[100.0])
    paths = simulate_paths(model, 100, 8, seed=3)
    spec = lsm.OptionSpec(strike=100.0, rate=0.0005, times=np.arange(1.0, 9.0))
    perm = np.random.default_rng(4).permutation(100)
    a = lsm.price_american(paths, spec, basis_scale=100.0)
    b = lsm.price_american(paths[perm], spec, basis_scale=100.0)
    assert abs(a.price - b.price) <= 1e-10
    assert abs(a.std_error - b.std_error) <= 1e-10


def test_itm_only_mode_runs_and_is_sane():
    model = gbm.GbmModel(rate=0.0005, sigma=[0.0126], x0=[100.0])
    paths = simulate_paths(model, 1000, 10, seed=5)
    spec = lsm.OptionSpec(strike=100.0, rate=0.0005,
                          times=np.arange(1.0, 11.0))
    est = lsm.price_american(paths, spec, itm_only=True, basis_scale=100.0)
    eu = lsm.european_price(paths, spec)
    assert est.price >= eu.price - 3.0 * math.hypot(est.std_error, eu.std_error)


def test_degenerate_design_falls_back_to_mean_continuation():
    # identical baskets at every date: fitted continuation = mean(V) via the
    # truncated pseudo-inverse, so backward induction still optimizes timing
    model = gbm.GbmModel(rate=0.01, sigma=[0.0], x0=[100.0])
    paths = gbm.simulate(model, np.zeros((60, 5, 1)))
    times = np.arange(1.0, 6.0)
    spec = lsm.OptionSpec(strike=90.0, rate=0.01, times=times)
    est = lsm.price_american(paths, spec)  # raw basis, deliberately
    expect = brute_force_deterministic_optimum(paths[0], 90.0, 0.01, times)
    assert abs(est.price - expect) <= 1e-10


def test_validation_errors():
    model = gbm.GbmModel(rate=0.0, sigma=[0.1], x0=[100.0])
    paths = simulate_paths(model, 60, 4, seed=6)
    with pytest.raises(DomainError):
        lsm.OptionSpec(strike=-1.0, rate=0.0, times=np.array([1.0]))
    with pytest.raises(DomainError):
        lsm.OptionSpec(strike=1.0, rate=0.0, times=np.array([2.0, 1.0]))
    spec = lsm.OptionSpec(strike=100.0, rate=0.0, times=np.arange(1.0, 6.0))
    with pytest.raises(DimensionError):
        lsm.price_american(paths, spec)  # 4 steps vs 5 dates
    small = paths[:10]
    with pytest.raises(DomainError):
        lsm.price_american(small, lsm.OptionSpec(strike=100.0, rate=0.0,
                                                 times=np.arange(1.0, 5.0)))


def test_strike_from_basket():
    assert lsm.strike_from_basket(np.array([78.22, 78.22])) == 79.0
    assert lsm.strike_from_basket(np.array([100.0])) == 101.0
    assert lsm.strike_from_basket(np.array([50.0]), round_to_int=False) == 50.5
    with pytest.raises(DomainError):
        lsm.strike_from_basket(np.array([-1.0]))
