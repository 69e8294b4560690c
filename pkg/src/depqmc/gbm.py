"""Marginal geometric Brownian motion: estimation, deBrowning, simulation.

Under the risk-neutral discretized GBM each margin follows

    X_{t_k,j} = X_{t_0,j} exp((r - sigma_j^2/2) t_k
                              + sigma_j sum_{l<=k} sqrt(t_l - t_{l-1}) Z_{l,j}),

so observed prices can be inverted into iid standard normal innovations
("deBrowning") whose cross-sectional dependence is modeled separately, and
dependent innovation cubes can be pushed forward into price paths.

The time grid is measured in trading days with unit spacing by default; the
risk-free rate r is interpreted per time step exactly as supplied.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMarginError, DimensionError, DomainError


@dataclass(frozen=True)
class GbmModel:
    """Per-margin GBM dynamics: rate, volatilities, start prices, time grid.

    grid holds t_0 < t_1 < ... (simulation origin first); None means unit
    spacing starting at 0.
    """

    rate: float
    sigma: np.ndarray
    x0: np.ndarray
    grid: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.atleast_1d(np.asarray(self.sigma, float)))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, float)))
        if np.any(self.sigma < 0.0):
            raise DomainError("volatilities must be nonnegative")
        if np.any(self.x0 <= 0.0):
            raise DomainError("initial prices must be positive")
        if self.sigma.shape != self.x0.shape:
            raise DimensionError("sigma and x0 must have one entry per margin")
        if self.grid is not None:
            g = np.asarray(self.grid, float)
            if np.any(np.diff(g) <= 0.0):
                raise DomainError("time grid must be strictly increasing")
            object.__setattr__(self, "grid", g)

    @property
    def dim(self):
        return self.sigma.shape[0]


def estimate(prices, rate, times=None, sigma=None):
    """Fit per-margin volatilities and recover innovations by deBrowning.

    prices is an (n+1) x d matrix of observations on the grid `times`
    (default 0, 1, ..., n).  sigma_j defaults to the sample standard
    deviation of the log-returns of margin j; pass `sigma` to pin it (used
    by exact-inverse tests).  Returns (model, innovations) where the model's
    x0 is the last observed price vector and innovations is n x d.
    """
    P = np.asarray(prices, dtype=float)
    if P.ndim != 2 or P.shape[0] < 3:
        raise DimensionError("need an (n+1) x d price matrix with n >= 2")
    if np.any(P <= 0.0):
        raise DomainError("prices must be strictly positive")
    n = P.shape[0] - 1
    t = np.arange(n + 1, dtype=float) if times is None else np.asarray(times, float)
    if t.shape != (n + 1,) or np.any(np.diff(t) <= 0.0):
        raise DomainError("times must be strictly increasing with one entry per row")

    logret = np.log(P[1:] / P[:-1])
    if sigma is None:
        sig = logret.std(axis=0, ddof=1)
    else:
        sig = np.atleast_1d(np.asarray(sigma, float))
    if np.any(sig <= 0.0):
        bad = np.nonzero(sig <= 0.0)[0]
        raise DegenerateMarginError(
            f"margin(s) {bad.tolist()} have zero log-return variance"
        )

    drift = rate - 0.5 * sig**2
    W = (np.log(P / P[0]) - drift[None, :] * t[:, None]) / sig[None, :]
    Z = np.diff(W, axis=0) / np.sqrt(np.diff(t))[:, None]
    model = GbmModel(rate=rate, sigma=sig, x0=P[-1].copy())
    return model, Z


def simulate(model, innovations, times=None):
    """Push an (n_pth, n_gen, d) cube of N(0,1) innovations into price paths.

    Every path starts at the model's x0 (the last training prices).  The
    returned cube holds prices at t_1, ..., t_{n_gen}; `times` (or the
    model grid) supplies t_0, ..., t_{n_gen}, defaulting to unit spacing.
    """
    Z = np.asarray(innovations, dtype=float)
    if Z.ndim != 3 or Z.shape[2] != model.dim:
        raise DimensionError(
            f"expected an (n_pth, n_gen, {model.dim}) innovation cube, "
            f"got {Z.shape}"
        )
    n_gen = Z.shape[1]
    t = times if times is not None else model.grid
    t = np.arange(n_gen + 1, dtype=float) if t is None else np.asarray(t, float)
    if t.shape != (n_gen + 1,) or np.any(np.diff(t) <= 0.0):
        raise DimensionError(
            f"time grid must hold t_0 .. t_{n_gen} strictly increasing"
        )
    dt = np.diff(t)
    tau = t[1:] - t[0]
    sig = model.sigma[None, None, :]
    cum = np.cumsum(np.sqrt(dt)[None, :, None] * Z, axis=1)
    drift = (model.rate - 0.5 * model.sigma**2)[None, :] * tau[:, None]
    return model.x0[None, None, :] * np.exp(drift[None, :, :] + sig * cum)
