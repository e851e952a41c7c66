class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UndefinedStatisticError(ValueError):
    """The requested statistic is not defined for the given input."""


class InsufficientDataError(ValueError):
    """Too few samples or replicates for the requested procedure."""
