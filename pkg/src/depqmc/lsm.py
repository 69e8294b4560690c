"""American basket call pricing by least squares Monte Carlo.

Backward induction over simulated price paths: at each exercise date the
continuation value is the OLS projection of the discounted downstream value
onto a 7-column basis of the basket price (intercept, three weighted
Laguerre polynomials and their cross products), clamped at zero, and paths
exercise wherever the immediate payoff is at least the continuation value.

Basket prices near typical equity levels drive e^{-x/2} into underflow, so
the basis can be evaluated on a rescaled basket x / basis_scale; the default
(scale 1) keeps the literal formulas.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class OptionSpec:
    """Strike, per-step rate, and exercise grid t_1 < ... < t_n = maturity."""

    strike: float
    rate: float
    times: np.ndarray

    def __post_init__(self):
        if self.strike <= 0.0:
            raise DomainError("strike must be positive")
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        if t.size < 1 or np.any(np.diff(t) <= 0.0) or t[0] <= 0.0:
            raise DomainError("exercise grid must be positive and increasing")
        object.__setattr__(self, "times", t)

    @property
    def maturity(self):
        return float(self.times[-1])


@dataclass(frozen=True)
class PriceEstimate:
    price: float
    std_error: float
    n_pth: int


def payoff(x, strike):
    """Basket call payoff max(mean(x) - K, 0); vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x.mean(axis=-1) - strike, 0.0)


def laguerre_basis(x):
    """Design row(s) (1, L0, L1, L2, L0*L1, L0*L2, L1*L2) of the basket price.

    L0 = e^(-x/2), L1 = e^(-x/2)(1 - x^2/2), L2 = e^(-x/2)(1 - 2x + x^2/2).
    """
    x = np.asarray(x, dtype=float)
    e = np.exp(-0.5 * x)
    l0 = e
    l1 = e * (1.0 - 0.5 * x * x)
    l2 = e * (1.0 - 2.0 * x + 0.5 * x * x)
    return np.stack(
        [np.ones_like(x), l0, l1, l2, l0 * l1, l0 * l2, l1 * l2], axis=-1
    )


def _ols_fitted(D, y):
    """OLS fitted values via QR, falling back to a truncated-SVD pseudo-inverse."""
    s = np.linalg.svd(D, compute_uv=False)
    if s[0] <= 0.0 or s[-1] < 1e-10 * s[0]:
        beta = np.linalg.pinv(D, rcond=1e-10) @ y
    else:
        Q, R = np.linalg.qr(D)
        beta = np.linalg.solve(R, Q.T @ y)
    return D @ beta


def price_american(paths, spec, itm_only=False, basis_scale=None):
    """Least squares Monte Carlo price of an American basket call.

    paths is an (n_pth, n_gen, d) cube of prices at the exercise dates of
    `spec`.  The regression runs over all paths by default (set `itm_only`
    to restrict it to in-the-money paths).  `basis_scale` divides the basket
    price before the basis evaluation; None keeps the raw basket.
    """
    X = np.asarray(paths, dtype=float)
    if X.ndim != 3:
        raise DimensionError("paths must be an (n_pth, n_gen, d) cube")
    n_pth, n_gen, _ = X.shape
    if n_pth < 50:
        raise DomainError(f"need at least 50 paths, got {n_pth}")
    if spec.times.shape != (n_gen,):
        raise DimensionError(
            f"exercise grid has {spec.times.size} dates but paths have "
            f"{n_gen} steps"
        )
    scale = 1.0 if basis_scale is None else float(basis_scale)
    t = np.concatenate([[0.0], spec.times])

    V = payoff(X[:, -1, :], spec.strike)
    for k in range(n_gen - 1, 0, -1):
        # Literal discounting by the (t_k, t_{k-1}) gap.
        V = np.exp(-spec.rate * (t[k] - t[k - 1])) * V
        basket = X[:, k - 1, :].mean(axis=1)
        E = np.maximum(basket - spec.strike, 0.0)
        fit_rows = E > 0.0 if itm_only else slice(None)
        D = laguerre_basis(basket[fit_rows] / scale)
        if D.shape[0] > 0:
            C = np.maximum(_ols_fitted(D, V[fit_rows]), 0.0)
            exercise = E[fit_rows] >= C
            if itm_only:
                idx = np.nonzero(E > 0.0)[0][exercise]
                V[idx] = E[idx]
            else:
                V = np.where(exercise, E, V)
    discounted = np.exp(-spec.rate * t[1]) * V
    price = float(discounted.mean())
    se = float(discounted.std(ddof=1) / np.sqrt(n_pth)) if n_pth > 1 else 0.0
    return PriceEstimate(price=price, std_error=se, n_pth=n_pth)


def european_price(paths, spec):
    """Discounted mean payoff at maturity on the same paths (lower bound)."""
    X = np.asarray(paths, dtype=float)
    V = payoff(X[:, -1, :], spec.strike)
    disc = np.exp(-spec.rate * spec.maturity) * V
    return PriceEstimate(
        price=float(disc.mean()),
        std_error=float(disc.std(ddof=1) / np.sqrt(len(disc))),
        n_pth=X.shape[0],
    )


def strike_from_basket(last_prices, multiplier=1.01, round_to_int=True):
    """Strike at `multiplier` times the current basket value.

    Rounded to the nearest integer by default, matching quoted strikes.
    """
    x = np.asarray(last_prices, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("prices must be positive")
    k = multiplier * x.mean()
    return float(np.round(k)) if round_to_int else float(k)
