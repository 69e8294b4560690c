import math

import numpy as np
import pytest
from scipy.stats import kendalltau

from depqmc import copulas, qmc, stats
from depqmc.errors import DimensionError, DomainError


def uniforms(n, d, seed):
    return qmc.pseudo_uniforms(n, d, seed=seed).points


def sample_tau(X):
    return kendalltau(X[:, 0], X[:, 1]).statistic


P2 = np.array([[1.0, 0.5], [0.5, 1.0]])


def test_independence_is_identity():
    U = uniforms(200, 3, 0)
    np.testing.assert_array_equal(copulas.sample(copulas.Independence(), U), U)


def test_normal_identity_correlation_roundtrip():
    U = uniforms(500, 2, 1)
    out = copulas.sample(copulas.NormalCopula(np.eye(2)), U)
    np.testing.assert_allclose(out, U, atol=1e-8)


def test_clayton_kendall_tau():
    U = uniforms(10**5, 2, 2)
    X = copulas.sample(copulas.Clayton(2.0), U)
    assert abs(sample_tau(X) - 0.5) <= 0.01  # tau = theta / (theta + 2)


def test_tau_consistency_all_families():
    n = 10**5
    X = copulas.sample(copulas.Clayton(1.0), uniforms(n, 2, 3))
    assert abs(sample_tau(X) - 1.0 / 3.0) <= 0.02
    rho_tau = 2.0 / math.pi * math.asin(0.5)
    X = copulas.sample(copulas.NormalCopula(P2), uniforms(n, 2, 4))
    assert abs(sample_tau(X) - rho_tau) <= 0.02
    X = copulas.sample(copulas.StudentTCopula(P2, 4.0), uniforms(n, 3, 5))
    assert abs(sample_tau(X) - rho_tau) <= 0.02


def test_margin_uniformity_ks():
    n = 2**12
    crit = 1.628 / math.sqrt(n)  # 1% asymptotic KS critical value
    grid = np.arange(1, n + 1) / n
    samples = {
        "clayton": copulas.sample(copulas.Clayton(2.0), uniforms(n, 2, 6)),
        "normal": copulas.sample(copulas.NormalCopula(P2), uniforms(n, 2, 7)),
        "t": copulas.sample(copulas.StudentTCopula(P2, 4.0), uniforms(n, 3, 8)),
    }
    for name, X in samples.items():
        for j in range(X.shape[1]):
            u = np.sort(X[:, j])
            ks = max(np.abs(u - grid).max(), np.abs(u - grid + 1.0 / n).max())
            assert ks < crit, (name, j, ks)


def test_t_large_nu_matches_normal_on_same_uniforms():
    U = uniforms(2000, 3, 9)
    Xt = copulas.sample(copulas.StudentTCopula(P2, 1e6), U)
    # feed the first two coordinates through the normal copula
    Xn = copulas.sample(copulas.NormalCopula(P2), U[:, :2])
    assert np.abs(Xt - Xn).max() <= 1e-3


def test_sample_width_validation():
    with pytest.raises(DimensionError):
        copulas.sample(copulas.NormalCopula(P2), uniforms(10, 3, 0))
    with pytest.raises(DimensionError):
        copulas.sample(copulas.StudentTCopula(P2, 4.0), uniforms(10, 2, 0))


def test_spec_validation():
    with pytest.raises(DomainError):
        copulas.Clayton(0.0)
    with pytest.raises(DomainError):
        copulas.NormalCopula(np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(DomainError):
        copulas.NormalCopula(np.array([[1.0, 1.2], [1.2, 1.0]]))
    with pytest.raises(DomainError):
        copulas.StudentTCopula(P2, 1.5)


def test_log_density_trivial_families():
    u = np.array([0.3, 0.8])
    assert copulas.log_density(copulas.Independence(), u) == 0.0
    assert abs(copulas.log_density(copulas.NormalCopula(np.eye(2)), u)) <= 1e-12


def test_log_density_boundary_error():
    with pytest.raises(DomainError):
        copulas.log_density(copulas.Clayton(1.0), np.array([0.0, 0.5]))


def clayton_cdf(u1, u2, theta):
    return (u1**-theta + u2**-theta - 1.0) ** (-1.0 / theta)


def test_clayton_density_matches_finite_difference():
    # c(u) = d^2 C / du1 du2 via central differences on the copula CDF
    theta, u = 1.0, (0.5, 0.5)
    h = 1e-4
    fd = (clayton_cdf(u[0] + h, u[1] + h, theta)
          - clayton_cdf(u[0] + h, u[1] - h, theta)
          - clayton_cdf(u[0] - h, u[1] + h, theta)
          + clayton_cdf(u[0] - h, u[1] - h, theta)) / (4.0 * h * h)
    got = math.exp(copulas.log_density(copulas.Clayton(theta), np.array(u)))
    assert abs(got - fd) <= 1e-4


def test_normal_t_density_against_scipy():
    from scipy.stats import multivariate_normal, norm
    u = np.array([[0.2, 0.7], [0.55, 0.4]])
    z = norm.ppf(u)
    ref = (multivariate_normal(cov=P2).logpdf(z)
           - norm.logpdf(z).sum(axis=1))
    got = copulas.log_density(copulas.NormalCopula(P2), u)
    np.testing.assert_allclose(got, ref, atol=1e-9)


def test_fit_mpl_clayton_recovery():
    X = copulas.sample(copulas.Clayton(2.0), uniforms(5000, 2, 10))
    spec = copulas.fit_mpl("clayton", stats.pseudo_observations(X))
    assert 1.8 <= spec.theta <= 2.2


def test_fit_mpl_normal_independence_recovery():
    U = stats.pseudo_observations(uniforms(5000, 2, 11))
    spec = copulas.fit_mpl("normal", U)
    assert abs(spec.corr[0, 1]) < 0.05


def test_fit_mpl_t_recovery():
    X = copulas.sample(copulas.StudentTCopula(P2, 4.0), uniforms(5000, 3, 12))
    spec = copulas.fit_mpl("t", stats.pseudo_observations(X))
    assert 0.45 <= spec.corr[0, 1] <= 0.55
    assert 3.0 <= spec.nu <= 6.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_roundtrip_seeds(seed):
    X = copulas.sample(copulas.Clayton(2.0), uniforms(4000, 3, 100 + seed))
    spec = copulas.fit_mpl("clayton", stats.pseudo_observations(X))
    assert abs(spec.theta - 2.0) <= 0.3


def test_fit_mpl_requires_enough_data():
    with pytest.raises(DomainError):
        copulas.fit_mpl("clayton", uniforms(15, 2, 0))


def test_quasi_vs_pseudo_variance_normal_copula():
    # mean of u1*u2 under the normal copula, 25 randomizations, n = 2^12
    spec = copulas.NormalCopula(P2)
    n = 2**12
    qv, pv = [], []
    for s in range(25):
        Xq = copulas.sample(spec, qmc.sobol_points(n, 2, seed=s, randomize=True).points)
        Xp = copulas.sample(spec, uniforms(n, 2, 600 + s))
        qv.append((Xq[:, 0] * Xq[:, 1]).mean())
        pv.append((Xp[:, 0] * Xp[:, 1]).mean())
    assert np.var(pv, ddof=1) / np.var(qv, ddof=1) >= 5.0


def test_serialization_roundtrip():
    for spec in (copulas.Independence(), copulas.Clayton(1.7),
                 copulas.NormalCopula(P2), copulas.StudentTCopula(P2, 5.5)):
        back = copulas.from_json(copulas.to_json(spec))
        assert type(back) is type(spec)
        U = uniforms(50, copulas.input_width(spec, 2), 13)
        np.testing.assert_array_equal(copulas.sample(spec, U),
                                      copulas.sample(back, U))
