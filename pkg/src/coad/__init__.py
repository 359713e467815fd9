"""Concept-based anomaly detection for retail shelf rows."""

from coad.errors import ConfigurationError, ContractError, ShapeError

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "ContractError", "ShapeError", "__version__"]
