"""Exception types shared across the package."""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class InputShapeError(ContractError):
    """Input point or batch has the wrong dimension for the model."""


class InvalidConfigError(ContractError):
    """A configuration value is outside its allowed range."""


class DomainError(ContractError):
    """A bound formula was queried outside its domain of validity."""
