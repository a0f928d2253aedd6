"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): ``DomainError``
for invalid inputs or violated model assumptions, and ``SolverError`` for
numerical routines that failed to deliver a certified answer.
"""

from __future__ import annotations


class RobustfolioError(Exception):
    """Base class for all package errors."""


class DomainError(RobustfolioError, ValueError):
    """Input outside the model's domain."""


class SolverError(RobustfolioError, RuntimeError):
    """A numerical routine did not converge or lost precision."""


# -- market / file structure -------------------------------------------------

class ParseError(DomainError):
    def __init__(self, source: str, location: str, message: str):
        self.source = source
        self.location = location
        super().__init__(f"{source}: {location}: {message}")


class MarketError(DomainError):
    """Malformed event tree; ``node`` names the offending node id."""

    def __init__(self, message: str, node=None):
        self.node = node
        super().__init__(message if node is None else f"{message} (node {node!r})")


class MissingPrice(MarketError):
    pass


class UnevenLeafDepth(MarketError):
    pass


class CyclicNodeGraph(MarketError):
    pass


class DimensionMismatch(DomainError):
    pass


# -- measures ----------------------------------------------------------------

class SupportMismatch(DomainError):
    pass


class ArbitrageDetected(DomainError):
    def __init__(self, message: str, vertex: int | None = None):
        self.vertex = vertex
        super().__init__(message)


class EmptyCore(DomainError):
    pass


# -- oracle ------------------------------------------------------------------

class GridGuardExceeded(DomainError):
    pass


class TooLarge(DomainError):
    pass


# -- numerics / solver -------------------------------------------------------

class LPNumericalFailure(SolverError):
    pass


class IterationCapExceeded(SolverError):
    """Iteration budget exhausted; ``best`` carries the best iterate found."""

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class InfeasibleStart(SolverError):
    pass


class BracketNotConvex(SolverError):
    pass


class SolverFailure(SolverError):
    pass


class DualityGapExceeded(SolverError):
    def __init__(self, message: str, primal: float, dual: float):
        self.primal = primal
        self.dual = dual
        super().__init__(f"{message} (primal={primal!r}, dual={dual!r})")
