"""Modeling and analysis toolkit for transmons in high-frequency (K-band) cavities."""

from .errors import (
    BracketError,
    ConfigError,
    ConvergenceError,
    FitError,
    PoleProximityError,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "FitError",
    "PoleProximityError",
    "__version__",
]
