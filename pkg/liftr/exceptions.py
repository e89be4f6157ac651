from __future__ import annotations


class LiftrError(Exception):
    pass


class ParamsError(LiftrError):
    pass


class ParseError(LiftrError):
    def __init__(self, line: int, col: int, expected: str) -> None:
        self.line = line
        self.col = col
        self.expected = expected
        super().__init__(f"line {line}, col {col}: expected {expected}")


class UnknownPredicate(LiftrError):
    pass


class ArityMismatch(LiftrError):
    pass


class ProbabilityOutOfRange(LiftrError):
    pass


class UndeclaredConstant(LiftrError):
    pass


class UnsupportedArity(LiftrError):
    pass


class ResourceCap(LiftrError):
    """A configured search budget was exhausted before an answer was found."""


class LiftFailure(LiftrError):
    """The lifted engine got stuck where a number was required."""

    def __init__(self, stuck: object, message: str = "") -> None:
        self.stuck = stuck
        super().__init__(message or f"lifted evaluation failed at: {stuck}")


class MultipleUnaries(LiftrError):
    pass


class AmbiguousSide(LiftrError):
    pass


class SingularMatrix(LiftrError):
    pass


class InconsistentSystem(SingularMatrix):
    pass


class NonIntegralSolution(LiftrError):
    pass


class GridExhausted(LiftrError):
    pass
