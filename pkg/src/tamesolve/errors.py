"""Exception hierarchy shared by the solvers and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class TameSolveError(Exception):
    exit_code = 1


class DomainError(TameSolveError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ConfigError(TameSolveError):
    exit_code = 2


class OutOfRadiusError(TameSolveError):
    """The target lies outside the ball where a local right-inverse is guaranteed."""

    exit_code = 3


class InadmissibleError(TameSolveError):
    """Problem parameters violate a sampled admissibility condition."""

    exit_code = 3


class NeumannDivergenceError(InadmissibleError):
    pass


class PathRefinementError(OutOfRadiusError):
    def __init__(self, segment, gap, allowed):
        self.segment = segment
        self.gap = gap
        self.allowed = allowed
        super().__init__(
            f"segment {segment}: gap {gap:.3e} exceeds admissible {allowed:.3e}; refine the path"
        )


class RadiusBreach(TameSolveError):
    """A flow step would leave the domain ball."""

    exit_code = 4


class NonConvergenceError(TameSolveError):
    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class LevelFailure(NonConvergenceError):
    def __init__(self, level, message, trace=None, states=None):
        super().__init__(f"level {level}: {message}", trace)
        self.level = level
        self.states = states or []


class OracleError(TameSolveError):
    exit_code = 5
