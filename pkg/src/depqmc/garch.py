"""Marginal ARMA(1,1)-GARCH(1,1) models with scaled-t innovations.

Each margin j of a d-dimensional return series follows

    X_{t,j}       = mu_{t,j} + sigma_{t,j} Z_{t,j},
    mu_{t,j}      = mu_j + phi_j (X_{t-1,j} - mu_j) + gamma_j (X_{t-1,j} - mu_{t-1,j}),
    sigma^2_{t,j} = omega_j + alpha_j (X_{t-1,j} - mu_{t-1,j})^2 + beta_j sigma^2_{t-1,j},

with Z_{t,j} iid, mean zero, unit variance (scaled t with nu_j > 2 dof).
Fitting is per-margin quasi-maximum likelihood on reparameterized
coordinates that enforce omega > 0, alpha, beta >= 0, alpha + beta < 1 and
|phi|, |gamma| < 1 by construction.  "deGARCHing" standardizes the data into
residuals Z-hat and maps them to uniforms, on which a cross-sectional
dependence model is fitted; forecasting runs the recursions forward on
simulated innovations.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, signal

from . import stats
from .errors import DimensionError, DomainError, FitError


@dataclass(frozen=True)
class GarchState:
    """Values carried between recursion steps: last X, last mu_t, last sigma_t^2."""

    x: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray


@dataclass(frozen=True)
class ArmaGarchModel:
    """Per-margin parameter arrays plus initial and terminal recursion states."""

    mu: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    nu: np.ndarray
    state0: GarchState  # recursion start used during estimation
    state: GarchState  # forecasting origin

    def __post_init__(self):
        for name in ("mu", "phi", "gamma", "omega", "alpha", "beta", "nu"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        if np.any(self.omega <= 0.0):
            raise DomainError("omega must be positive")
        if np.any(self.alpha < 0.0) or np.any(self.beta < 0.0):
            raise DomainError("alpha and beta must be nonnegative")
        if np.any(self.alpha + self.beta >= 1.0):
            raise DomainError("alpha + beta must be below 1 (covariance stationarity)")
        if np.any(np.abs(self.phi) >= 1.0) or np.any(np.abs(self.gamma) >= 1.0):
            raise DomainError("|phi| and |gamma| must be below 1")
        if np.any(self.nu <= 2.0):
            raise DomainError("nu must exceed 2 (unit-variance innovations)")
        if np.any(np.abs(self.phi + self.gamma) < 1e-12):
            warnings.warn("phi + gamma is numerically zero for some margin; "
                          "the ARMA part is not identified", RuntimeWarning)

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class Epd:
    """Empirical predictive distribution: simulated values at one horizon."""

    horizon: int
    draws: np.ndarray  # (n_pth, d)
    origin: int | None = None  # conditioning time index


def _filter_margin(x, mu, phi, gamma, omega, alpha, beta, x0, mu0, s0):
    """mu_t, sigma2_t and eps_t sequences over x, starting from (x0, mu0, s0)."""
    xprev = np.concatenate([[x0], x[:-1]])
    eps0 = x0 - mu0
    r = (x - mu) - phi * (xprev - mu)
    eps, _ = signal.lfilter([1.0], [1.0, gamma], r, zi=np.array([-gamma * eps0]))
    eps_lag = np.concatenate([[eps0], eps[:-1]])
    u = omega + alpha * eps_lag**2
    sigma2, _ = signal.lfilter([1.0], [1.0, -beta], u, zi=np.array([beta * s0]))
    return x - eps, sigma2, eps


def _unpack(z):
    mu = z[0]
    phi = math.tanh(z[1])
    gamma = math.tanh(z[2])
    omega = math.exp(z[3])
    s = 1.0 / (1.0 + math.exp(-z[4]))  # persistence alpha + beta
    w = 1.0 / (1.0 + math.exp(-z[5]))  # share alpha / (alpha + beta)
    alpha = s * w
    beta = s * (1.0 - w)
    nu = 2.0 + math.exp(z[6])
    return mu, phi, gamma, omega, alpha, beta, nu


def _pack(mu, phi, gamma, omega, alpha, beta, nu):
    s = alpha + beta
    w = alpha / s if s > 0 else 0.5
    logit = lambda p: math.log(p / (1.0 - p))
    return np.array([
        mu, math.atanh(phi), math.atanh(gamma), math.log(omega),
        logit(min(max(s, 1e-8), 1 - 1e-8)), logit(min(max(w, 1e-8), 1 - 1e-8)),
        math.log(nu - 2.0),
    ])


def _neg_loglik(z, x, x0, mu0, s0):
    mu, phi, gamma, omega, alpha, beta, nu = _unpack(z)
    _, sigma2, eps = _filter_margin(x, mu, phi, gamma, omega, alpha, beta,
                                    x0, mu0, s0)
    if np.any(sigma2 <= 0.0) or not np.all(np.isfinite(sigma2)):
        return np.inf
    sig = np.sqrt(sigma2)
    ll = stats.scaled_t_logpdf(eps / sig, nu) - np.log(sig)
    val = -ll.sum()
    return val if np.isfinite(val) else np.inf


def fit(returns, burn=10, uniforms="pit", maxfev=20000):
    """Per-margin QML fit; returns (model, residual uniforms).

    The recursion is initialized at the sample mean / variance of each
    margin.  Residual uniforms come from the fitted scaled-t CDF
    (``uniforms="pit"``) or from columnwise ranks (``uniforms="ranks"``);
    the first `burn` residuals are excluded to dampen initialization
    effects.
    """
    X = np.asarray(returns, dtype=float)
    if X.ndim != 2:
        raise DimensionError("returns must be an n x d matrix")
    n, d = X.shape
    if n < 250:
        raise DomainError(f"need at least 250 observations per margin, got {n}")
    if uniforms not in ("pit", "ranks"):
        raise ValueError("uniforms must be 'pit' or 'ranks'")

    params = np.empty((7, d))
    mu0 = X.mean(axis=0)
    s20 = X.var(axis=0, ddof=1)
    Z_hat = np.empty_like(X)
    for j in range(d):
        x = X[:, j]
        z0 = _pack(mu0[j], 0.1, 0.05, 0.10 * s20[j], 0.05, 0.85, 8.0)
        res = optimize.minimize(
            _neg_loglik, z0, args=(x, mu0[j], mu0[j], s20[j]),
            method="Nelder-Mead",
            options={"maxiter": maxfev, "maxfev": maxfev,
                     "xatol": 1e-6, "fatol": 1e-8, "adaptive": True},
        )
        params[:, j] = _unpack(res.x)
        if not res.success:
            best = _model_from_params(params[:, : j + 1], X[:, : j + 1],
                                      mu0[: j + 1], s20[: j + 1])
            raise FitError(
                f"QML optimizer did not converge for margin {j}: {res.message}",
                best=best,
            )

    model = _model_from_params(params, X, mu0, s20)
    for j in range(d):
        _, sigma2, eps = _filter_margin(
            X[:, j], *params[:6, j], mu0[j], mu0[j], s20[j]
        )
        Z_hat[:, j] = eps / np.sqrt(sigma2)
    Z_kept = Z_hat[burn:]
    if uniforms == "pit":
        U = np.column_stack([
            stats.scaled_t_cdf(Z_kept[:, j], params[6, j]) for j in range(d)
        ])
        U = np.clip(U, 2.0**-53, 1.0 - 2.0**-53)
    else:
        U = stats.pseudo_observations(Z_kept)
    return model, U


def _model_from_params(params, X, mu0, s20):
    d = params.shape[1]
    end_x = np.empty(d)
    end_mu = np.empty(d)
    end_s2 = np.empty(d)
    for j in range(d):
        mu_t, sigma2, _ = _filter_margin(
            X[:, j], *params[:6, j], mu0[j], mu0[j], s20[j]
        )
        # Terminal state: one recursion step past the last observation needs
        # (X_n, mu_n, sigma2_n), all available from the in-sample pass.
        end_x[j] = X[-1, j]
        end_mu[j] = mu_t[-1]
        end_s2[j] = sigma2[-1]
    state0 = GarchState(x=mu0.copy(), mu=mu0.copy(), sigma2=s20.copy())
    state = GarchState(x=end_x, mu=end_mu, sigma2=end_s2)
    return ArmaGarchModel(
        mu=params[0], phi=params[1], gamma=params[2], omega=params[3],
        alpha=params[4], beta=params[5], nu=params[6],
        state0=state0, state=state,
    )


def conditional_moments(model, returns, state=None):
    """(mu_t, sigma2_t, z_t) sequences over `returns` from a given state.

    Defaults to the model's terminal state; pass ``model.state0`` to rerun
    the in-sample recursion.  Parameters are never re-estimated.
    """
    X = np.atleast_2d(np.asarray(returns, dtype=float))
    if X.shape[1] != model.dim:
        raise DimensionError(f"expected {model.dim} columns, got {X.shape[1]}")
    st = state if state is not None else model.state
    mu_t = np.empty_like(X)
    s2_t = np.empty_like(X)
    z_t = np.empty_like(X)
    for j in range(model.dim):
        mu_t[:, j], s2_t[:, j], eps = _filter_margin(
            X[:, j], model.mu[j], model.phi[j], model.gamma[j],
            model.omega[j], model.alpha[j], model.beta[j],
            st.x[j], st.mu[j], st.sigma2[j],
        )
        z_t[:, j] = eps / np.sqrt(s2_t[:, j])
    return mu_t, s2_t, z_t


def filter(model, returns):
    """Advance the terminal state over new observations; parameters untouched."""
    X = np.asarray(returns, dtype=float)
    if X.size == 0:
        return model
    X = np.atleast_2d(X)
    mu_t, s2_t, _ = conditional_moments(model, X)
    new_state = GarchState(x=X[-1].copy(), mu=mu_t[-1], sigma2=s2_t[-1])
    return replace(model, state=new_state)


def forecast(model, uniforms, origin=None):
    """Simulate forward from the terminal state on dependent uniforms.

    uniforms is an (n_pth, h, d) cube; innovations are the scaled-t
    quantiles of its entries.  Returns one Epd per horizon 1..h.
    """
    U = np.asarray(uniforms, dtype=float)
    if U.ndim != 3 or U.shape[2] != model.dim:
        raise DimensionError(
            f"expected an (n_pth, h, {model.dim}) uniform cube, got {U.shape}"
        )
    n_pth, h, d = U.shape
    Z = np.empty_like(U)
    for j in range(d):
        Z[:, :, j] = stats.scaled_t_quantile(U[:, :, j], model.nu[j])

    x_prev = np.broadcast_to(model.state.x, (n_pth, d)).copy()
    mu_prev = np.broadcast_to(model.state.mu, (n_pth, d)).copy()
    s2_prev = np.broadcast_to(model.state.sigma2, (n_pth, d)).copy()
    out = []
    for k in range(h):
        mu_t = model.mu + model.phi * (x_prev - model.mu) + model.gamma * (x_prev - mu_prev)
        s2_t = model.omega + model.alpha * (x_prev - mu_prev) ** 2 + model.beta * s2_prev
        x_t = mu_t + np.sqrt(s2_t) * Z[:, k, :]
        out.append(Epd(horizon=k + 1, draws=x_t, origin=origin))
        x_prev, mu_prev, s2_prev = x_t, mu_t, s2_t
    return out


def simulate(model, uniforms, seed=None, state=None):
    """Sample a return path matrix (n, d) from the model itself.

    Used by the synthetic data generators: `uniforms` is an (n, d) matrix of
    dependent uniforms driving the innovations; the recursion starts at
    `state` (default state0).
    """
    U = np.atleast_2d(np.asarray(uniforms, dtype=float))
    if U.shape[1] != model.dim:
        raise DimensionError(f"expected {model.dim} columns, got {U.shape[1]}")
    n, d = U.shape
    Z = np.column_stack([
        stats.scaled_t_quantile(U[:, j], model.nu[j]) for j in range(d)
    ])
    st = state if state is not None else model.state0
    x_prev, mu_prev, s2_prev = st.x.copy(), st.mu.copy(), st.sigma2.copy()
    X = np.empty((n, d))
    for k in range(n):
        mu_t = model.mu + model.phi * (x_prev - model.mu) + model.gamma * (x_prev - mu_prev)
        s2_t = model.omega + model.alpha * (x_prev - mu_prev) ** 2 + model.beta * s2_prev
        X[k] = mu_t + np.sqrt(s2_t) * Z[k]
        x_prev, mu_prev, s2_prev = X[k], mu_t, s2_t
    return X


def to_json(model):
    """One JSON object per margin with parameters and both states."""
    margins = []
    for j in range(model.dim):
        margins.append({
            "mu": model.mu[j], "phi": model.phi[j], "gamma": model.gamma[j],
            "omega": model.omega[j], "alpha": model.alpha[j],
            "beta": model.beta[j], "nu": model.nu[j],
            "state": {"x": model.state.x[j], "mu": model.state.mu[j],
                      "sigma2": model.state.sigma2[j]},
            "state0": {"x": model.state0.x[j], "mu": model.state0.mu[j],
                       "sigma2": model.state0.sigma2[j]},
        })
    return {"margins": margins}


def from_json(obj):
    m = obj["margins"]
    get = lambda key: np.array([mm[key] for mm in m], dtype=float)
    st = lambda key: GarchState(
        x=np.array([mm[key]["x"] for mm in m]),
        mu=np.array([mm[key]["mu"] for mm in m]),
        sigma2=np.array([mm[key]["sigma2"] for mm in m]),
    )
    return ArmaGarchModel(
        mu=get("mu"), phi=get("phi"), gamma=get("gamma"), omega=get("omega"),
        alpha=get("alpha"), beta=get("beta"), nu=get("nu"),
        state0=st("state0"), state=st("state"),
    )
