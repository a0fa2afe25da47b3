"""Exception hierarchy.

Every error raised on purpose by this package derives from ``ProxySAError``,
so callers can catch the whole family at once. The concrete classes also
inherit from the closest builtin so ``except ValueError`` keeps working.
"""


class ProxySAError(Exception):
    """Base class for all package errors."""


class DomainError(ProxySAError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(ProxySAError, ArithmeticError):
    """A weight F(1-F)/rho^2 was requested where the density vanishes."""


class CapabilityError(ProxySAError, NotImplementedError):
    """The requested feature is not available for this object."""


class ShapeError(ProxySAError, ValueError):
    """Array dimensions do not line up."""


class ValidationError(ProxySAError, ValueError):
    """Malformed parameters or inconsistent declarations."""


class UnknownModelError(ProxySAError, KeyError):
    """No built-in model is registered under the given name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InsufficientDataError(ProxySAError, ValueError):
    """Too few samples for the requested statistic."""


class DegenerateModelError(ProxySAError, ValueError):
    """The model output has zero variance, so indices are undefined."""


class IncompleteInputError(ProxySAError, ValueError):
    """A mapping is missing entries the computation needs."""


class DivergenceError(ProxySAError, ArithmeticError):
    """A supremum kept growing up to the search limit."""


class ReportIOError(ProxySAError, OSError):
    """Reading or writing a report failed."""
