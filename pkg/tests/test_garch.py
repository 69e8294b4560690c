import dataclasses

import numpy as np
import pytest
from scipy.stats import spearmanr

from depqmc import copulas, garch, qmc, stats
from depqmc.errors import DimensionError, DomainError


def make_model(d=1, mu=0.0, phi=0.5, gamma=-0.3, omega=0.05, alpha=0.05,
               beta=0.9, nu=6.0, sigma2_0=None):
    if sigma2_0 is None:
        sigma2_0 = omega / max(1.0 - alpha - beta, 1e-6)
    state = garch.GarchState(x=np.full(d, mu), mu=np.full(d, mu),
                             sigma2=np.full(d, sigma2_0))
    return garch.ArmaGarchModel(
        mu=np.full(d, mu), phi=np.full(d, phi), gamma=np.full(d, gamma),
        omega=np.full(d, omega), alpha=np.full(d, alpha),
        beta=np.full(d, beta), nu=np.full(d, nu), state0=state, state=state,
    )


@pytest.fixture(scope="module")
def fitted():
    true = make_model()
    U = qmc.pseudo_uniforms(5500, 1, seed=0).points
    X = garch.simulate(true, U)[500:]
    model, U_hat = garch.fit(X)
    Z_true = stats.scaled_t_quantile(U[500:, 0], 6.0)
    return true, X, model, U_hat, Z_true


def test_fit_recovers_dynamics(fitted):
    _, X, model, _, Z_true = fitted
    assert 0.85 <= model.alpha[0] + model.beta[0] <= 0.99
    _, _, Z_hat = garch.conditional_moments(model, X, state=model.state0)
    assert np.corrcoef(Z_hat[:, 0], Z_true)[0, 1] > 0.95


def test_fit_satisfies_stationarity_constraints(fitted):
    _, _, model, _, _ = fitted
    assert np.all(model.omega > 0.0)
    assert np.all(model.alpha >= 0.0) and np.all(model.beta >= 0.0)
    assert np.all(model.alpha + model.beta < 1.0)
    assert np.all(np.abs(model.phi) < 1.0) and np.all(np.abs(model.gamma) < 1.0)
    assert np.all(model.nu > 2.0)


def test_residual_uniforms_pass_ks(fitted):
    _, _, _, U_hat, _ = fitted
    n = U_hat.shape[0]
    u = np.sort(U_hat[:, 0])
    grid = np.arange(1, n + 1) / n
    ks = max(np.abs(u - grid).max(), np.abs(u - grid + 1.0 / n).max())
    assert ks < 1.628 / np.sqrt(n)  # 1% critical value
    assert U_hat.min() > 0.0 and U_hat.max() < 1.0


def test_fit_iid_location_scale():
    # alpha = beta = 0, phi = gamma = 0 data: model collapses to iid
    rng_u = qmc.pseudo_uniforms(3000, 1, seed=3).points[:, 0]
    mu_true, sd_true = 1.3, 0.5
    X = (mu_true + sd_true * stats.scaled_t_quantile(rng_u, 8.0))[:, None]
    model, _ = garch.fit(X)
    se = X.std(ddof=1) / np.sqrt(len(X))
    assert abs(model.mu[0] - mu_true) <= 3.0 * se
    _, s2, _ = garch.conditional_moments(model, X, state=model.state0)
    assert s2.std() / s2.mean() < 0.05  # essentially constant variance path
    assert abs(s2.mean() - sd_true**2) / sd_true**2 < 0.1


def test_ranks_option_gives_pseudo_observations(fitted):
    _, X, _, _, _ = fitted
    model, U_rank = garch.fit(X, uniforms="ranks")
    n = U_rank.shape[0]
    expected = set((np.arange(1, n + 1) / (n + 1)).round(12))
    assert set(U_rank[:, 0].round(12)) == expected


def test_filter_empty_returns_same_state(fitted):
    _, _, model, _, _ = fitted
    out = garch.filter(model, np.empty((0, 1)))
    assert out is model


def test_filter_over_training_data_reaches_fit_state(fitted):
    _, X, model, _, _ = fitted
    restarted = dataclasses.replace(model, state=model.state0)
    out = garch.filter(restarted, X)
    np.testing.assert_allclose(out.state.x, model.state.x, rtol=0, atol=0)
    np.testing.assert_allclose(out.state.mu, model.state.mu, rtol=0, atol=0)
    np.testing.assert_allclose(out.state.sigma2, model.state.sigma2,
                               rtol=0, atol=0)


def test_filter_one_observation_recursion(fitted):
    _, _, model, _, _ = fitted
    x_new = 0.37
    out = garch.filter(model, np.array([[x_new]]))
    st = model.state
    mu_t = (model.mu + model.phi * (st.x - model.mu)
            + model.gamma * (st.x - st.mu))
    s2_t = (model.omega + model.alpha * (st.x - st.mu) ** 2
            + model.beta * st.sigma2)
    assert abs(out.state.mu[0] - mu_t[0]) <= 1e-14
    assert abs(out.state.sigma2[0] - s2_t[0]) <= 1e-14
    assert out.state.x[0] == x_new


def test_degarching_roundtrip_pinned_parameters():
    # simulate, then invert with the true parameters: innovations recovered
    # within 1e-8 after a 50-step burn-in (the initial state is mismatched,
    # but |gamma|, beta < 1 forget it geometrically)
    true = make_model(mu=0.1, phi=0.4, gamma=-0.2, omega=0.2, alpha=0.1,
                      beta=0.6, nu=5.0)
    U = qmc.pseudo_uniforms(400, 1, seed=5).points
    Z = stats.scaled_t_quantile(U[:, 0], 5.0)
    X = garch.simulate(true, U)
    start = garch.GarchState(x=np.array([0.0]), mu=np.array([0.0]),
                             sigma2=np.array([1.0]))  # deliberately wrong
    _, _, Z_hat = garch.conditional_moments(true, X, state=start)
    np.testing.assert_allclose(Z_hat[50:, 0], Z[50:], atol=1e-8)
    # with the true starting state the inversion is exact from step one
    _, _, Z_exact = garch.conditional_moments(true, X, state=true.state0)
    np.testing.assert_allclose(Z_exact[:, 0], Z, atol=1e-10)


def test_forecast_median_uniforms_follow_conditional_mean(fitted):
    _, _, model, _, _ = fitted
    U = np.full((4, 6, 1), 0.5)
    epds = garch.forecast(model, U)
    x_prev, mu_prev, s2_prev = (model.state.x[0], model.state.mu[0],
                                model.state.sigma2[0])
    for epd in epds:
        mu_t = (model.mu[0] + model.phi[0] * (x_prev - model.mu[0])
                + model.gamma[0] * (x_prev - mu_prev))
        s2_t = (model.omega[0] + model.alpha[0] * (x_prev - mu_prev) ** 2
                + model.beta[0] * s2_prev)
        np.testing.assert_allclose(epd.draws[:, 0], mu_t, atol=1e-12)
        x_prev, mu_prev, s2_prev = mu_t, mu_t, s2_t


def test_forecast_iid_model_mean():
    model = make_model(phi=0.0, gamma=1e-9, alpha=0.0, beta=0.0, omega=1.0,
                       mu=2.0, sigma2_0=1.0)
    U = qmc.pseudo_uniforms(10**4, 1, seed=6).points[:, :, None]
    epd = garch.forecast(model, U)[0]
    se = epd.draws.std(ddof=1) / np.sqrt(len(epd.draws))
    assert abs(epd.draws.mean() - 2.0) <= 3.0 * se


def test_forecast_dependence_passthrough():
    model = make_model(d=2, phi=0.0, gamma=1e-9, alpha=0.0, beta=0.0,
                       omega=1.0, mu=0.0, sigma2_0=1.0)
    P = np.array([[1.0, 0.7], [0.7, 1.0]])
    U_dep = copulas.sample(copulas.StudentTCopula(P, 4.0),
                           qmc.pseudo_uniforms(10**4, 3, seed=7).points)
    U_ind = qmc.pseudo_uniforms(10**4, 2, seed=8).points
    rho_dep = spearmanr(U_dep[:, 0], U_dep[:, 1]).statistic
    epd_dep = garch.forecast(model, U_dep[:, None, :])[0]
    epd_ind = garch.forecast(model, U_ind[:, None, :])[0]
    r_dep = spearmanr(epd_dep.draws[:, 0], epd_dep.draws[:, 1]).statistic
    r_ind = spearmanr(epd_ind.draws[:, 0], epd_ind.draws[:, 1]).statistic
    assert abs(r_dep - rho_dep) <= 0.05
    assert abs(r_ind) <= 0.05


def test_forecast_deterministic_and_shape_checked(fitted):
    _, _, model, _, _ = fitted
    U = qmc.pseudo_uniforms(50, 3, seed=9).points[:, :, None]
    a = garch.forecast(model, U)
    b = garch.forecast(model, U)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.draws, y.draws)
    assert [e.horizon for e in a] == [1, 2, 3]
    with pytest.raises(DimensionError):
        garch.forecast(model, np.zeros((5, 2, 3)))


def test_model_validation():
    with pytest.raises(DomainError):
        make_model(alpha=0.5, beta=0.5)  # alpha + beta = 1
    with pytest.raises(DomainError):
        make_model(omega=0.0)
    with pytest.raises(DomainError):
        make_model(phi=1.0)
    with pytest.raises(DomainError):
        make_model(nu=2.0)
    with pytest.warns(RuntimeWarning):
        make_model(phi=0.3, gamma=-0.3)  # phi + gamma = 0: unidentified


def test_fit_requires_enough_data():
    with pytest.raises(DomainError):
        garch.fit(np.zeros((100, 1)))


def test_serialization_roundtrip(fitted):
    _, _, model, _, _ = fitted
    back = garch.from_json(garch.to_json(model))
    np.testing.assert_array_equal(back.mu, model.mu)
    np.testing.assert_array_equal(back.nu, model.nu)
    np.testing.assert_array_equal(back.state.sigma2, model.state.sigma2)
    np.testing.assert_array_equal(back.state0.x, model.state0.x)
