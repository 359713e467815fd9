class ShapeError(ValueError):
    """Array dimensions do not satisfy an operation's shape contract."""


class ConfigurationError(ValueError):
    """A requested variant, selection or asset is unavailable."""


class ContractError(ValueError):
    """Inputs are well-shaped but violate an operation's usage contract."""
