"""Exception hierarchy shared across the toolkit.

CLI exit codes map onto these: ScenarioError -> 2, SolverError -> 3,
LineSearchError -> 4.
"""


class FpControlError(Exception):
    """Base class for all toolkit errors."""


class ScenarioError(FpControlError):
    """Scenario file is missing, unparseable, or fails validation."""


class SolverError(FpControlError):
    """A numerical solve failed (divergence, singular operator, ...)."""


class DivergenceError(SolverError):
    """Time integration produced a non-finite state."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class SingularOperatorError(SolverError):
    """Tridiagonal solve broke down; carries axis and line index."""

    def __init__(self, message: str, axis: int, line: int):
        super().__init__(message)
        self.axis = axis
        self.line = line


class ReflectionError(SolverError):
    """Boundary reflection failed to terminate; the SDE step is too large."""


class MassDeviationError(SolverError):
    """A density snapshot drifted too far from unit mass for a diagnostic."""


class LineSearchError(FpControlError):
    """Armijo backtracking exhausted its budget without sufficient decrease."""
