"""Birth-death processes coming down from infinity: exact hitting-time analysis and simulation."""

import json as _json

from ._cdfi import (
    ConvergenceError,
    ModelError,
    RateModel,
    ResourceError,
    __version__,
    analysis_table,
    extinction_cdf,
    hitting_mean_from_infinity,
    hitting_times,
    hypoexp_cdf,
    ks_statistic,
    laplace_T0,
    limit_law_G,
    presets,
    pure_death_rates,
    simulate_tau,
    survival,
    tau_mean,
    var_T_from_infinity,
)
from ._cdfi import regime as _regime


def regime(model, lo, hi):
    """Regime report for levels lo..hi as a dict."""
    return _json.loads(_regime(model, lo, hi))


__all__ = [
    "ConvergenceError",
    "ModelError",
    "RateModel",
    "ResourceError",
    "__version__",
    "analysis_table",
    "extinction_cdf",
    "hitting_mean_from_infinity",
    "hitting_times",
    "hypoexp_cdf",
    "ks_statistic",
    "laplace_T0",
    "limit_law_G",
    "presets",
    "pure_death_rates",
    "regime",
    "simulate_tau",
    "survival",
    "tau_mean",
    "var_T_from_infinity",
]
