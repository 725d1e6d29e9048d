"""Exception hierarchy shared by all moyal_lab modules."""


class MoyalLabError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(MoyalLabError, ValueError):
    pass


class DomainError(MoyalLabError, ValueError):
    pass


class AlignmentError(MoyalLabError, ValueError):
    """A translation vector does not sit on the grid lattice."""


class ConfigurationError(MoyalLabError, ValueError):
    """Inconsistent grids, invalid config keys or values."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ResolutionError(MoyalLabError, ValueError):
    """A symbol is not resolved by the grid it is sampled on."""


class NumericalError(MoyalLabError, ArithmeticError):
    pass


class ResourceError(MoyalLabError):
    """Dense problem exceeds the desk-scale ceiling."""
