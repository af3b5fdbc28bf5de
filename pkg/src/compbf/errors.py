"""Exception types raised across the package."""


class CompbfError(Exception):
    """Base class for all package errors."""


class DomainError(CompbfError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class UnsupportedOrderError(CompbfError):
    """Requested derivative order is outside the supported range."""


class DerivativeInstabilityError(CompbfError, ArithmeticError):
    """Two independent evaluations that must agree did not."""


class QuadratureError(CompbfError, ArithmeticError):
    """A numerical integral did not reach its tolerance."""


class InsufficientPointsError(CompbfError):
    """A deployment has fewer base stations than the cluster needs."""


class RankDeficiencyError(CompbfError, ArithmeticError):
    """Zero-forcing constraint rows are linearly dependent."""


class StarvationError(CompbfError):
    """Conditional sampling accepted too few trials."""


class InfeasibleOverheadError(CompbfError, ValueError):
    """Pilot overhead exceeds the coherence block for every candidate."""


class TruncationError(CompbfError):
    """A realization had no interferers inside the simulation window."""
