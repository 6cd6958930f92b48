"""Consumption and investment when one asset trades only at Poisson times."""

from ._core import (
    ConfigError,
    DerivedConstants,
    FormatError,
    IlliquidError,
    InadmissiblePolicy,
    InvalidParameter,
    MarketParams,
    NoConvergence,
    RunConfig,
    Solution,
    WellPosednessViolated,
    choose_horizon,
    derive_constants,
    merton_fractions,
    merton_value,
    simulate,
    solve,
)

__all__ = [
    "ConfigError",
    "DerivedConstants",
    "FormatError",
    "IlliquidError",
    "InadmissiblePolicy",
    "InvalidParameter",
    "MarketParams",
    "NoConvergence",
    "RunConfig",
    "Solution",
    "WellPosednessViolated",
    "choose_horizon",
    "derive_constants",
    "merton_fractions",
    "merton_value",
    "simulate",
    "solve",
]
