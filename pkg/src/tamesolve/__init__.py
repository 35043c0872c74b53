"""Continuous right-inverses of nonlinear maps: local descent-flow solver,
branch tracking, tame Fourier scales and a Galerkin Nash-Moser iteration."""
from .branch import PathSpec, circle_path, line_path, track_path, uniqueness_probe
from .errors import (
    ConfigError,
    DomainError,
    InadmissibleError,
    LevelFailure,
    NonConvergenceError,
    OracleError,
    OutOfRadiusError,
    TameSolveError,
)
from .local import DescentConfig, LocalProblem, SolveResult, solve_local
from .nash_moser import NashMoserConfig, run, uniqueness_suite
from .problems import (
    ExampleA,
    NemytskiiProblem,
    SyntheticLossProblem,
    examplea_closed_inverse,
    manufactured_solution,
    manufactured_target,
    root_census,
)
from .scale import ScaleSpec, ScaleVector, norm, project

__version__ = "0.1.0"
