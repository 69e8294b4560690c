"""Forecast and estimator evaluation metrics.

Variogram scores compare the powered pairwise component distances of a
realization against their means under an empirical predictive distribution;
variance reduction factors and Wald confidence intervals summarize estimates
across replications.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import stats
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class ReplicationSet:
    """One estimate per replication, with a label for reporting."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.size < 2:
            raise DomainError("need at least two replications")
        object.__setattr__(self, "values", v)


def _draws(epd):
    draws = getattr(epd, "draws", epd)
    return np.atleast_2d(np.asarray(draws, dtype=float))


def variogram_score(realization, epd, order=0.25):
    """Variogram score of order r for one realization against one EPD.

    Sums (|x_j1 - x_j2|^r - mean_i |X^(i)_j1 - X^(i)_j2|^r)^2 over all
    ordered component pairs, the diagonal included.
    """
    if order <= 0.0:
        raise DomainError("variogram order must be positive")
    x = np.asarray(realization, dtype=float)
    draws = _draws(epd)
    if draws.shape[1] != x.shape[0]:
        raise DimensionError(
            f"realization has {x.shape[0]} components but EPD draws have "
            f"{draws.shape[1]}"
        )
    obs = np.abs(x[:, None] - x[None, :]) ** order
    sim = (np.abs(draws[:, :, None] - draws[:, None, :]) ** order).mean(axis=0)
    return float(((obs - sim) ** 2).sum())


def average_variogram_score(realizations, epds, order=0.25):
    """Mean variogram score over an aligned test window of (realization, EPD)."""
    realizations = list(realizations)
    epds = list(epds)
    if not realizations:
        raise DomainError("empty evaluation window")
    if len(realizations) != len(epds):
        raise DimensionError(
            f"{len(realizations)} realizations vs {len(epds)} EPDs"
        )
    scores = [variogram_score(x, e, order) for x, e in zip(realizations, epds)]
    return float(np.mean(scores))


def variance_reduction_factor(pseudo, quasi):
    """Sample variance of the pseudo estimates over that of the quasi estimates."""
    p = pseudo.values if isinstance(pseudo, ReplicationSet) else np.asarray(pseudo, float)
    q = quasi.values if isinstance(quasi, ReplicationSet) else np.asarray(quasi, float)
    vp = p.var(ddof=1)
    vq = q.var(ddof=1)
    if vq == 0.0:
        warnings.warn("quasi replication variance is zero; VRF is infinite",
                      RuntimeWarning)
        return math.inf
    return float(vp / vq)


def wald_ci(values, level=0.95):
    """Wald interval mean +/- z_(1+level)/2 * sd / sqrt(n_rep).

    sd is the plain (population) standard deviation of the replication
    values; at the replication counts used here the distinction from the
    ddof=1 estimate is immaterial.
    """
    v = values.values if isinstance(values, ReplicationSet) else np.atleast_1d(np.asarray(values, float))
    if v.size < 2:
        raise DomainError("need at least two replications")
    if not 0.0 < level < 1.0:
        raise DomainError("confidence level must lie in (0,1)")
    z = stats.normal_quantile(0.5 * (1.0 + level))
    half = z * v.std() / math.sqrt(v.size)
    m = v.mean()
    return float(m - half), float(m + half)
