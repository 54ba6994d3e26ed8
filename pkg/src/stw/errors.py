"""Exception types shared across the package.

Two failure modes are distinguished everywhere: a *domain* error means the
request itself is malformed (window outside a sequence's support, negative
level, weight not suitable for the requested functional), while a *numeric*
error means the request is legitimate but cannot be computed reliably at
floating-point scale (overflow, quadrature non-convergence, windows too
large to materialize).  The command-line driver maps them to distinct exit
codes so scripted callers can tell bad input from numeric trouble.
"""


class StwError(Exception):
    """Base class for all package-specific errors."""


class DomainError(StwError):
    """The request is outside the mathematical domain of the operation."""


class NumericError(StwError):
    """The computation cannot be carried out at floating-point scale."""


class AssertionFailure(StwError):
    """A reproduction command's embedded assertion failed."""
