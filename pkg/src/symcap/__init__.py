"""Certified upper bounds on the linear cylindrical capacity of convex bodies."""

__version__ = "0.1.0"

from symcap.errors import (
    ConditioningError,
    ConfigError,
    InputError,
    NumericalError,
    SchemaError,
    SymcapError,
)

__all__ = [
    "__version__",
    "ConditioningError",
    "ConfigError",
    "InputError",
    "NumericalError",
    "SchemaError",
    "SymcapError",
]
