"""Reflection-enhanced transmission simulator with dynamic panel-group virtualization."""
__version__ = "0.1.0"

from .errors import ConfigError, ConstraintViolation, InvalidScenarioError, RetfError  # noqa: E402

__all__ = ["__version__", "RetfError", "InvalidScenarioError", "ConstraintViolation", "ConfigError"]
