"""Tracking the continuous selection ``y -> g(y)`` along sampled paths."""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DomainError, NonConvergenceError, PathRefinementError
from .local import DescentConfig, LocalProblem, SolveResult, solve_local

__all__ = [
    "PathSpec",
    "BranchResult",
    "ProbeResult",
    "line_path",
    "circle_path",
    "refine_path",
    "track_path",
    "uniqueness_probe",
    "write_branch_csv",
]

ADMISSIBILITY_MARGIN = 0.9
LIPSCHITZ_SLACK = 1e-6


@dataclass
class PathSpec:
    """Ordered targets starting at zero."""

    samples: list
    norm: Any = abs

    def __post_init__(self):
        if len(self.samples) < 1:
            raise DomainError("a path needs at least one sample")
        if self.norm(self.samples[0]) != 0:
            raise DomainError("the first sample of a path must be 0")

    def gaps(self) -> list[float]:
        return [float(self.norm(b - a)) for a, b in zip(self.samples, self.samples[1:])]

    @property
    def max_gap(self) -> float:
        return max(self.gaps(), default=0.0)

    def closing_index(self, tol: float = 1e-14) -> int | None:
        """First index whose target coincides with the final one, if the path closes."""
        last = self.samples[-1]
        scale = max(1.0, float(self.norm(last)))
        for j, y in enumerate(self.samples[:-1]):
            if j > 0 and float(self.norm(y - last)) <= tol * scale:
                return j
        return None


def line_path(end, steps: int, start=None) -> PathSpec:
    """``steps`` equal segments from 0 (through ``start`` if given) to ``end``."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    zero = end * 0
    a = zero if start is None else start
    pts = [zero] if start is not None else []
    pts += [a + (end - a) * (j / steps) for j in range(steps + 1)]
    return PathSpec(pts)


def circle_path(radius: float, samples: int, lead_in: int = 8, phase: float = 0.0) -> PathSpec:
    """Radial lead-in from 0 to ``radius e^{i phase}``, then one full turn of ``samples`` segments."""
    if samples < 3:
        raise DomainError("a closed circle needs at least 3 samples")
    start = radius * cmath.exp(1j * phase)
    pts = [start * (j / lead_in) for j in range(lead_in + 1)]
    pts += [radius * cmath.exp(1j * (phase + 2 * math.pi * j / samples)) for j in range(1, samples)]
    pts.append(start)
    return PathSpec(pts)


def refine_path(path: PathSpec) -> PathSpec:
    """Insert midpoints between consecutive samples."""
    pts = [path.samples[0]]
    for a, b in zip(path.samples, path.samples[1:]):
        pts += [a + (b - a) * 0.5, b]
    return PathSpec(pts, path.norm)


@dataclass
class BranchResult:
    targets: list
    points: list
    residuals: list[float]
    modulus: list[float]
    gaps: list[float]
    bound: float
    closure_gap: float | None
    solves: list[SolveResult] = field(repr=False, default_factory=list)

    @property
    def residual_max(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def endpoint(self):
        return self.points[-1]

    def lipschitz_ok(self, slack: float = LIPSCHITZ_SLACK) -> bool:
        return all(d <= self.bound * g * (1 + slack) for d, g in zip(self.modulus, self.gaps))


def track_path(problem: LocalProblem, path: PathSpec, cfg: DescentConfig | None = None) -> BranchResult:
    """Follow the selection along ``path``, warm-starting each solve at the previous point.

    Every segment must be shorter than ``0.9`` times the restart radius at the
    current point; otherwise :class:`PathRefinementError` names the segment.
    """
    cfg = cfg or DescentConfig()
    nx = problem.norm_x
    x = problem.origin
    points, residuals, solves = [x], [0.0], []
    gaps = []
    for i, (ya, yb) in enumerate(zip(path.samples, path.samples[1:])):
        gap = float(problem.norm_y(yb - ya))
        allowed = ADMISSIBILITY_MARGIN * problem.warm_radius(x)
        if not gap < allowed:
            raise PathRefinementError(i, gap, allowed)
        res = solve_local(problem, yb, cfg, x0=x)
        if not res.converged:
            raise NonConvergenceError(f"segment {i}: solve ended with status {res.status}", res)
        x = res.x
        points.append(x)
        residuals.append(res.residual)
        solves.append(res)
        gaps.append(gap)
    modulus = [float(nx(b - a)) for a, b in zip(points, points[1:])]
    j = path.closing_index()
    closure = None if j is None else float(nx(points[-1] - points[j]))
    return BranchResult(list(path.samples), points, residuals, modulus, gaps,
                        problem.selection_bound, closure, solves)


@dataclass
class ProbeResult:
    """``unique`` is True/False, or None when some run did not converge."""

    unique: bool | None
    limits: list
    results: list[SolveResult] = field(repr=False)
    spread: float
    left_defect: float | None = None


def uniqueness_probe(problem: LocalProblem, y, starts: Sequence, cfg: DescentConfig | None = None,
                     left_inverse_check: bool = True) -> ProbeResult:
    """Run the flow from each start and compare the limits within ``10 tol``.

    Starts other than the origin are used as warm starts without the restart
    radius gate: the probe asks where each flow lands.  With
    ``left_inverse_check`` the defect ``||L Df h - h|| / ||h||`` is sampled at
    every limit, as evidence for the injectivity assumption.
    """
    cfg = cfg or DescentConfig()
    results = []
    for x0 in starts:
        if float(problem.norm_x(x0)) == 0.0:
            results.append(solve_local(problem, y, cfg))
        else:
            results.append(solve_local(problem, y, cfg, x0=x0, check_radius=False))
    limits = [r.x for r in results]
    ref = limits[0]
    spread = max((float(problem.norm_x(x - ref)) for x in limits), default=0.0)
    left = None
    if left_inverse_check:
        left = 0.0
        for x in limits:
            h = problem.right_inverse(x, y)
            hn = float(problem.norm_x(h))
            if hn > 0:
                back = problem.right_inverse(x, problem.df(x, h))
                left = max(left, float(problem.norm_x(back - h)) / hn)
    if not all(r.converged for r in results):
        return ProbeResult(None, limits, results, spread, left)
    return ProbeResult(spread <= 10.0 * cfg.tol, limits, results, spread, left)


def _is_scalar(v) -> bool:
    return np.ndim(v) == 0 and not hasattr(v, "coeffs")


def write_branch_csv(result: BranchResult, fh) -> None:
    """CSV rows: index, target, selection point, segment modulus, residual.

    Scalar targets are written as real and imaginary parts; vector targets as norms.
    """
    w = csv.writer(fh, lineterminator="\n")
    scalar = _is_scalar(result.targets[0])
    if scalar:
        w.writerow(["index", "y_re", "y_im", "g_re", "g_im", "modulus", "residual"])
    else:
        w.writerow(["index", "y_norm", "g_norm", "modulus", "residual"])
    for i, (y, g, r) in enumerate(zip(result.targets, result.points, result.residuals)):
        mod = result.modulus[i - 1] if i > 0 else 0.0
        if scalar:
            y, g = complex(y), complex(g)
            row = [y.real, y.imag, g.real, g.imag, mod, r]
        else:
            row = [float(np.linalg.norm(np.ravel(y))), float(np.linalg.norm(np.ravel(g))), mod, r]
        w.writerow([i] + [f"{float(v):.17g}" for v in row])
