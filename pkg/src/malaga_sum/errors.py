"""Exception types raised across the package."""


class MalagaError(Exception):
    """Base class for all package errors."""


class DomainError(MalagaError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ParameterError(MalagaError, ValueError):
    """Invalid or degenerate channel / model parameters."""


class QuadratureError(MalagaError, ArithmeticError):
    """Non-finite integrand value or failed adaptive refinement."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class ConvergenceError(MalagaError, ArithmeticError):
    """A series (and every available fallback) failed to converge."""

    def __init__(self, message, partial_value=None, terms=None):
        super().__init__(message)
        self.partial_value = partial_value
        self.terms = terms


class FitInfeasibleError(MalagaError, ArithmeticError):
    """The six-moment system has no admissible real solution."""

    def __init__(self, message, discriminant=None):
        super().__init__(message)
        self.discriminant = discriminant


class DegenerateMomentsError(MalagaError, ArithmeticError):
    """Moment sequence makes a fit denominator vanish."""


class CoefficientError(MalagaError, ArithmeticError):
    """A residue-series coefficient hit an unresolved Gamma pole."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TieError(MalagaError, ArithmeticError):
    """The two lower parameters coincide, so the asymptotic order is ambiguous."""
