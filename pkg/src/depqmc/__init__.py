"""Dependence-aware Monte Carlo / quasi-Monte Carlo engine.

Learns a cross-sectional dependence model (a generative moment matching
network or a parametric copula) from multivariate time-series residuals and
uses it to price American basket call options under dependent geometric
Brownian motions and to produce probabilistic forecasts under dependent
ARMA-GARCH dynamics, with randomized quasi-Monte Carlo sampling available
throughout as a variance-reduction option.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    copulas,
    datasets,
    errors,
    experiments,
    garch,
    gbm,
    gmmn,
    lsm,
    qmc,
    scoring,
    stats,
)
