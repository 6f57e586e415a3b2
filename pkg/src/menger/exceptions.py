"""Exception hierarchy shared by every module."""


class MengerError(Exception):
    """Base class for errors raised by this package."""


class DomainError(MengerError, ValueError):
    """Input lies outside the domain of an operation."""


class RankDeficiencyError(DomainError):
    """A set of vectors is linearly dependent.

    ``index`` is the position of the first vector found to lie in the span
    of its predecessors.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PreconditionError(MengerError, ValueError):
    """A documented precondition of a bound or check does not hold."""


class SamplingError(MengerError, RuntimeError):
    """Randomized sampling failed to produce enough accepted draws."""


class BudgetError(MengerError, RuntimeError):
    """An exhaustive computation would exceed its configured budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class MeshParseError(MengerError, ValueError):
    """Malformed mesh or cloud file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
