"""Exception hierarchy shared by every module."""


class ConvextError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ConvextError, ValueError):
    """An argument lies outside the domain of the function being evaluated."""


class ConfigurationError(ConvextError, ValueError):
    """A loss/regularizer/decomposition combination is not supported."""


class InfeasibleError(ConvextError):
    """The label constraint set (or a node of a search tree) has no feasible point."""


class NumericError(ConvextError, ArithmeticError):
    """A numerical routine failed to bracket, converge or validate.

    ``diagnostics`` carries whatever state is useful to reproduce the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedMethodError(ConvextError):
    """The requested evaluation is not available for this extension method."""
