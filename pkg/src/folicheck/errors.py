"""Exception hierarchy. Every error raised on purpose derives from FoliCheckError."""


class FoliCheckError(Exception):
    """Base class for all folicheck errors."""


class InvalidPoint(FoliCheckError):
    pass


class InvalidTag(FoliCheckError):
    pass


class ExprSyntaxError(FoliCheckError):
    """Parse failure in the expression language.

    ``offset`` is the byte offset of the offending token and ``expected``
    the set of token kinds that would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        suffix = f" (expected one of: {exp})" if exp else ""
        super().__init__(f"{message} at offset {offset}{suffix}")


class UnknownFunction(ExprSyntaxError):
    pass


class UnboundName(FoliCheckError):
    pass


class DomainError(FoliCheckError, ArithmeticError):
    pass


class FrameError(FoliCheckError):
    pass


class ValidationError(FoliCheckError):
    """Scenario or embedding failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class GenericityFailed(FoliCheckError):
    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)


class DegenerateSection(FoliCheckError):
    pass


class SuspectedDegenerate(FoliCheckError):
    pass


class OpenChainError(FoliCheckError):
    pass


class NonGenericLoopPlacement(FoliCheckError):
    pass


class NoRegularValue(FoliCheckError):
    pass


class NotTransverse(FoliCheckError):
    pass


class UnknownScenario(FoliCheckError):
    pass


class BadParams(FoliCheckError):
    pass


class ParseError(FoliCheckError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
