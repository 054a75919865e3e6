"""Exception hierarchy.

Model errors (exit status 1 on the command line) carry an optional source
location; resource and numerical failures have their own branches.
"""


class StochPiError(Exception):
    """Base class for every error raised by this package."""


class ModelError(StochPiError):
    """A problem with the model text or with a term built from it."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ParseError(ModelError):
    def __init__(self, message, line=None, column=None, expected=()):
        self.expected = tuple(expected)
        if self.expected:
            message = f"{message} (expected {', '.join(self.expected)})"
        super().__init__(message, line, column)


class UnguardedConstantError(ModelError):
    pass


class UnboundVariableError(ModelError):
    pass


class DuplicateDefinitionError(ModelError):
    pass


class ArityMismatchError(ModelError):
    pass


class UnknownConstantError(ModelError):
    pass


class GuardNotGroundError(ModelError):
    pass


class EvaluationError(ModelError):
    """Integer arithmetic applied to a non-integer name."""


class BoundNameClash(StochPiError):
    pass


class WeightsNotNormalized(StochPiError, ValueError):
    pass


class MassOverflow(StochPiError, ValueError):
    pass


class StateLimitExceeded(StochPiError):
    def __init__(self, limit, frontier, witness):
        self.limit = limit
        self.frontier = frontier
        self.witness = list(witness)
        trace = " -> ".join(self.witness[-5:])
        super().__init__(
            f"state limit {limit} exceeded with {frontier} states still on the "
            f"frontier; last states on witness path: {trace}"
        )


class DivergenceSuspected(StochPiError):
    pass


class NotConverged(StochPiError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")
