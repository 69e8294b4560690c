"""Parametric dependence models: independence, Clayton, normal and t copulas.

Each family supports sampling by a deterministic transform of a uniform
input matrix (so the same code path serves pseudo-random and quasi-random
inputs), closed-form log densities, and maximum pseudo-likelihood fitting.
The t copula consumes one extra uniform column per sample to drive its
chi-square mixing variable.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special
from scipy.stats import kendalltau

from . import stats
from .errors import DimensionError, DomainError, FitError
from .qmc import UNIT_HI, UNIT_LO

THETA_MIN, THETA_MAX = 1e-4, 50.0
_NONPD_PENALTY = 1e10  # finite so bounded Brent steps stay well defined
NU_MIN, NU_MAX = 2.01, 1e6
NU_GRID = (2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0)


@dataclass(frozen=True)
class Independence:
    """Independence copula: the identity transform on uniforms."""


@dataclass(frozen=True)
class Clayton:
    """Clayton copula with theta > 0 (lower-tail-dependent regime)."""

    theta: float

    def __post_init__(self):
        if not THETA_MIN <= self.theta <= THETA_MAX:
            raise DomainError(
                f"Clayton theta must lie in [{THETA_MIN}, {THETA_MAX}], "
                f"got {self.theta}"
            )


def _check_correlation(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"correlation matrix must be square, got {P.shape}")
    if not np.allclose(P, P.T, atol=1e-10):
        raise DomainError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(P), 1.0, atol=1e-10):
        raise DomainError("correlation matrix must have a unit diagonal")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise DomainError("correlation matrix must be positive definite") from None
    return P


@dataclass(frozen=True)
class NormalCopula:
    """Normal copula parameterized by a correlation matrix."""

    corr: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "corr", _check_correlation(self.corr))
        self.corr.flags.writeable = False

    @property
    def dim(self):
        return self.corr.shape[0]


@dataclass(frozen=True)
class StudentTCopula:
    """t copula with correlation matrix and degrees of freedom nu > 2."""

    corr: np.ndarray
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "corr", _check_correlation(self.corr))
        self.corr.flags.writeable = False
        if not NU_MIN <= self.nu <= NU_MAX:
            raise DomainError(
                f"t copula nu must lie in [{NU_MIN}, {NU_MAX}], got {self.nu}"
            )

    @property
    def dim(self):
        return self.corr.shape[0]


# Any of the four families.
CopulaSpec = Independence | Clayton | NormalCopula | StudentTCopula


def input_width(spec, d):
    """Uniform columns consumed per d-dimensional sample (d+1 for the t)."""
    return d + 1 if isinstance(spec, StudentTCopula) else d


def sample(spec, U):
    """Transform a uniform matrix into a copula sample.

    U must be n x d for independence/Clayton/normal and n x (d+1) for the t
    copula, whose last column drives the chi-square mixing variable.  Feeding
    a randomized Sobol' matrix yields quasi-random copula samples.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2:
        raise DimensionError("U must be a 2-d matrix")
    if isinstance(spec, Independence):
        return U.copy()
    if isinstance(spec, Clayton):
        return _sample_clayton(spec.theta, U)
    if isinstance(spec, NormalCopula):
        if U.shape[1] != spec.dim:
            raise DimensionError(
                f"normal copula of dimension {spec.dim} needs {spec.dim} "
                f"uniform columns, got {U.shape[1]}"
            )
        L = np.linalg.cholesky(spec.corr)
        X = stats.normal_quantile(U) @ L.T
        return stats.normal_cdf(X)
    if isinstance(spec, StudentTCopula):
        d = spec.dim
        if U.shape[1] != d + 1:
            raise DimensionError(
                f"t copula of dimension {d} needs {d + 1} uniform columns "
                f"(mixing variable last), got {U.shape[1]}"
            )
        L = np.linalg.cholesky(spec.corr)
        Z = stats.normal_quantile(U[:, :d]) @ L.T
        # W ~ chi^2_nu through the quantile of the last coordinate.
        W = 2.0 * special.gammaincinv(0.5 * spec.nu, U[:, -1])
        X = Z / np.sqrt(W / spec.nu)[:, None]
        return special.stdtr(spec.nu, X)
    raise TypeError(f"unknown copula spec {type(spec).__name__}")


def _sample_clayton(theta, U):
    """Inverse-Rosenblatt (conditional quantile) Clayton sampler."""
    n, d = U.shape
    X = np.empty_like(U)
    X[:, 0] = U[:, 0]
    if d == 1:
        return X
    with np.errstate(over="ignore"):
        T = X[:, 0] ** (-theta)
        for j in range(1, d):
            expo = -theta / (theta * j + 1.0)
            g = U[:, j] ** expo - 1.0
            X[:, j] = np.clip(
                (1.0 + np.clip(T, None, 1e300) * g) ** (-1.0 / theta),
                UNIT_LO, UNIT_HI,
            )
            T = T + X[:, j] ** (-theta) - 1.0
    return X


def log_density(spec, u):
    """log c(u) for a single point (d,) or a batch (n, d)."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    if np.any(U <= 0.0) or np.any(U >= 1.0):
        raise DomainError("u must lie strictly inside the unit cube")
    if isinstance(spec, Independence):
        out = np.zeros(U.shape[0])
    elif isinstance(spec, Clayton):
        out = _clayton_logpdf(spec.theta, U)
    elif isinstance(spec, NormalCopula):
        if U.shape[1] != spec.dim:
            raise DimensionError("dimension mismatch with correlation matrix")
        out = _normal_logpdf(spec.corr, stats.normal_quantile(U))
    elif isinstance(spec, StudentTCopula):
        if U.shape[1] != spec.dim:
            raise DimensionError("dimension mismatch with correlation matrix")
        x = stats.t_quantile(U, spec.nu)
        out = _t_logpdf(spec.corr, spec.nu, x)
    else:
        raise TypeError(f"unknown copula spec {type(spec).__name__}")
    return float(out[0]) if single else out


def _clayton_logpdf(theta, U):
    d = U.shape[1]
    logu = np.log(U)
    s = np.exp(-theta * logu).sum(axis=1) - (d - 1.0)
    const = np.sum(np.log1p(theta * np.arange(1, d)))
    return (const - (1.0 / theta + d) * np.log(s)
            - (theta + 1.0) * logu.sum(axis=1))


def _normal_logpdf(P, Z):
    L = np.linalg.cholesky(P)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    W = np.linalg.solve(L, Z.T)  # L^{-1} Z^T
    quad = (W * W).sum(axis=0)
    return -0.5 * logdet - 0.5 * (quad - (Z * Z).sum(axis=1))


def _t_logpdf(P, nu, X):
    n, d = X.shape
    L = np.linalg.cholesky(P)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    W = np.linalg.solve(L, X.T)
    quad = (W * W).sum(axis=0)
    joint = (special.gammaln(0.5 * (nu + d)) - special.gammaln(0.5 * nu)
             - 0.5 * d * math.log(nu * math.pi) - 0.5 * logdet
             - 0.5 * (nu + d) * np.log1p(quad / nu))
    margin = (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
              - 0.5 * math.log(nu * math.pi)
              - 0.5 * (nu + 1.0) * np.log1p(X * X / nu))
    return joint - margin.sum(axis=1)


def nearest_correlation(M, floor=1e-6):
    """Project a symmetric matrix to a correlation matrix.

    Eigenvalues are clipped at `floor`, then the diagonal is rescaled to 1.
    """
    A = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(A)
    A = (V * np.maximum(w, floor)) @ V.T
    s = np.sqrt(np.diag(A))
    A = A / np.outer(s, s)
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 1.0)
    return A


def _pairwise_tau(U):
    n, d = U.shape
    tau = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            t = kendalltau(U[:, i], U[:, j]).statistic
            tau[i, j] = tau[j, i] = t
    return tau


def fit_mpl(family, U, max_sweeps=30, tol=1e-4):
    """Maximum pseudo-likelihood fit of a copula family to pseudo-observations.

    family is one of "independence", "clayton", "normal", "t".  Raises
    FitError (carrying the best iterate) if the iteration cap is reached
    before the parameters settle.
    """
    U = np.asarray(U, dtype=float)
    n, d = U.shape
    if n < 10 * d:
        raise DomainError(f"need n >= 10 d for a stable fit, got n={n}, d={d}")
    family = family.lower()
    if family == "independence":
        return Independence()
    if family == "clayton":
        return _fit_clayton(U)
    if family == "normal":
        return _fit_normal(U, max_sweeps, tol)
    if family in ("t", "student", "studentt", "student-t"):
        return _fit_t(U, max_sweeps, tol)
    raise ValueError(f"unknown copula family {family!r}")


def _fit_clayton(U):
    tau = _pairwise_tau(U)
    d = U.shape[1]
    tbar = tau[np.triu_indices(d, 1)].mean()
    theta0 = np.clip(2.0 * tbar / max(1.0 - tbar, 1e-6), THETA_MIN, THETA_MAX)

    def nll(theta):
        if not THETA_MIN <= theta <= THETA_MAX:
            return np.inf
        return -_clayton_logpdf(theta, U).sum()

    res = optimize.minimize_scalar(
        nll, bounds=(THETA_MIN, THETA_MAX), method="bounded",
        options={"xatol": 1e-6},
    )
    spec = Clayton(float(np.clip(res.x, THETA_MIN, THETA_MAX)))
    if not res.success:
        raise FitError("Clayton pseudo-likelihood search did not converge",
                       best=spec)
    # Keep theta0 in the loop: bounded Brent can park at a local flat spot
    # when the likelihood is very shallow near independence.
    if nll(theta0) < res.fun:
        spec = Clayton(float(theta0))
    return spec


def _normal_nll(P, Z):
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return _NONPD_PENALTY
    logdet = 2.0 * np.log(np.diag(L)).sum()
    W = np.linalg.solve(L, Z.T)
    return 0.5 * Z.shape[0] * logdet + 0.5 * ((W * W).sum() - (Z * Z).sum())


def _coordinate_ascent(P, nll, max_sweeps, tol, raise_on_cap=True, best_tag=None):
    """Refine off-diagonal entries one at a time by bounded 1-d searches."""
    d = P.shape[0]
    P = P.copy()
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(d):
            for j in range(i + 1, d):
                def obj(r):
                    Q = P.copy()
                    Q[i, j] = Q[j, i] = r
                    return nll(Q)

                res = optimize.minimize_scalar(
                    obj, bounds=(-0.999, 0.999), method="bounded",
                    options={"xatol": 1e-5},
                )
                r_new = float(res.x)
                if obj(r_new) <= obj(P[i, j]):
                    delta = max(delta, abs(r_new - P[i, j]))
                    P[i, j] = P[j, i] = r_new
        if delta < tol:
            return P
    if raise_on_cap:
        raise FitError(
            f"coordinate ascent did not settle within {max_sweeps} sweeps",
            best=best_tag(P) if best_tag else P,
        )
    return P


def _fit_normal(U, max_sweeps, tol):
    Z = stats.normal_quantile(U)
    P0 = nearest_correlation(np.corrcoef(Z, rowvar=False))
    P = _coordinate_ascent(P0, lambda Q: _normal_nll(Q, Z), max_sweeps, tol,
                           best_tag=lambda Q: NormalCopula(nearest_correlation(Q)))
    return NormalCopula(nearest_correlation(P))


def _t_nll_factory(U, nu):
    X = stats.t_quantile(U, nu)
    n, d = X.shape
    margin = (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
              - 0.5 * math.log(nu * math.pi)
              - 0.5 * (nu + 1.0) * np.log1p(X * X / nu)).sum()
    const = n * (special.gammaln(0.5 * (nu + d)) - special.gammaln(0.5 * nu)
                 - 0.5 * d * math.log(nu * math.pi))

    def nll(P):
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            return _NONPD_PENALTY
        logdet = 2.0 * np.log(np.diag(L)).sum()
        W = np.linalg.solve(L, X.T)
        quad = (W * W).sum(axis=0)
        joint = const - 0.5 * n * logdet - 0.5 * (nu + d) * np.log1p(quad / nu).sum()
        return -(joint - margin)

    return nll


def _fit_t(U, max_sweeps, tol):
    tau = _pairwise_tau(U)
    P = nearest_correlation(np.sin(0.5 * math.pi * tau))
    np.fill_diagonal(P, 1.0)

    best = None  # (nll, nu, P)
    for nu in NU_GRID:
        nll = _t_nll_factory(U, nu)
        P_nu = _coordinate_ascent(P, nll, max_sweeps=2, tol=tol,
                                  raise_on_cap=False)
        val = nll(P_nu)
        if best is None or val < best[0]:
            best = (val, nu, P_nu)
        P = P_nu  # warm start the next grid node

    _, nu_best, P_best = best
    idx = NU_GRID.index(nu_best)
    lo = NU_GRID[max(idx - 1, 0)] if idx > 0 else NU_MIN
    hi = NU_GRID[min(idx + 1, len(NU_GRID) - 1)] if idx < len(NU_GRID) - 1 else NU_GRID[-1] * 2

    def nu_obj(nu):
        return _t_nll_factory(U, nu)(P_best)

    res = optimize.minimize_scalar(nu_obj, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-3})
    nu_fin = float(res.x) if res.fun <= best[0] else nu_best
    P_fin = _coordinate_ascent(P_best, _t_nll_factory(U, nu_fin), max_sweeps=2,
                               tol=tol, raise_on_cap=False)
    return StudentTCopula(nearest_correlation(P_fin), nu_fin)


def to_json(spec):
    """Serialize a copula spec to the JSON object used by the CLI."""
    if isinstance(spec, Independence):
        return {"family": "independence"}
    if isinstance(spec, Clayton):
        return {"family": "clayton", "theta": spec.theta}
    if isinstance(spec, NormalCopula):
        return {"family": "normal", "P": spec.corr.tolist()}
    if isinstance(spec, StudentTCopula):
        return {"family": "t", "nu": spec.nu, "P": spec.corr.tolist()}
    raise TypeError(f"unknown copula spec {type(spec).__name__}")


def from_json(obj):
    """Inverse of to_json; accepts a dict or a JSON string."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    family = obj["family"].lower()
    if family == "independence":
        return Independence()
    if family == "clayton":
        return Clayton(float(obj["theta"]))
    if family == "normal":
        return NormalCopula(np.asarray(obj["P"], dtype=float))
    if family == "t":
        return StudentTCopula(np.asarray(obj["P"], dtype=float), float(obj["nu"]))
    raise ValueError(f"unknown copula family {family!r}")
