"""Local surjection solver: explicit right-inverse descent flow.

Solves ``f(x) = y`` for ``y`` in the ball of radius ``(1 - a) R / m`` by
integrating ``dx/dt = L(x) (y - f(x))`` from ``x = 0`` (or a warm start) with
explicit Euler steps.  A step of size ``h`` is accepted only if the residual
drops by the factor ``1 - (1 - a') h / 2``; otherwise ``h`` is halved.

Points and targets may be any objects supporting ``+``, ``-`` and scalar
multiplication (complex scalars, numpy arrays, :class:`~tamesolve.scale.ScaleVector`,
mpmath numbers); the problem supplies the norms.
"""
from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .errors import DomainError, NeumannDivergenceError, OutOfRadiusError, RadiusBreach

__all__ = [
    "LocalProblem",
    "DescentConfig",
    "SolveResult",
    "AssumptionReport",
    "euclidean_norm",
    "sup_norm",
    "descent_step",
    "solve_local",
    "neumann_series",
    "neumann_right_inverse",
    "residual_decay_check",
    "certify_assumptions",
    "write_trace_csv",
]

BOUND_SLACK = 1e-9


def euclidean_norm(v) -> float:
    return float(np.linalg.norm(np.ravel(np.asarray(v))))


def sup_norm(v) -> float:
    return float(np.max(np.abs(v)))


@dataclass(frozen=True)
class LocalProblem:
    """``f`` on the ball ``||x|| < R`` with ``f(origin) = 0`` and a bounded right-inverse field.

    ``m`` bounds ``sup ||L(x)||`` strictly and ``a < 1`` bounds the defect
    ``||(Df(x') L(x) - I) w|| / ||w||`` for ``x'`` near ``x``.  ``l_sup`` is the
    known value of ``sup ||L(x)||`` if available; otherwise ``sampler`` must
    draw random ``(x, k)`` pairs (point in the ball, target direction) so it
    can be estimated.
    """

    f: Callable[[Any], Any]
    df: Callable[[Any, Any], Any]
    right_inverse: Callable[[Any, Any], Any]
    origin: Any
    R: float
    m: float
    a: float
    lip: float | None = None
    l_sup: float | None = None
    norm_x: Callable[[Any], float] = euclidean_norm
    norm_y: Callable[[Any], float] = euclidean_norm
    sampler: Callable[[np.random.Generator], tuple] | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R}")
        if not self.m > 0:
            raise DomainError(f"m must be positive, got {self.m}")
        if not 0.0 <= self.a < 1.0:
            raise DomainError(f"a must lie in [0, 1), got {self.a}")
        if self.l_sup is not None and not self.l_sup < self.m:
            raise DomainError(f"sup ||L|| = {self.l_sup} must be < m = {self.m}")

    @property
    def target_radius(self) -> float:
        """``R' = (1 - a) R / m``."""
        return (1.0 - self.a) * self.R / self.m

    @property
    def selection_bound(self) -> float:
        """Lipschitz-type constant ``m / (1 - a)`` of the continuous selection."""
        return self.m / (1.0 - self.a)

    def warm_radius(self, x0) -> float:
        """Target radius around ``f(x0)`` for a restart at ``x0``."""
        return (1.0 - self.a) * (self.R - self.norm_x(x0)) / self.m


@dataclass(frozen=True)
class DescentConfig:
    """Integration and stopping parameters of the descent flow.

    ``a_prime`` defaults to ``(1 + a) / 2`` and ``tau`` to
    ``(m - m0) / ((1 - a') m0)`` with ``m0 = (sup ||L|| + m) / 2``.  ``tau`` is
    the horizon on which the decay contract is checked; the solver keeps
    integrating past it until the residual test is met.  The initial step is
    clipped to ``tau``.
    """

    step: float = 0.25
    max_step: float = 1.0
    min_step: float = 1e-10
    growth: float = 2.0
    a_prime: float | None = None
    tol: float = 1e-12
    atol: float = 0.0
    max_steps: int = 500
    tau: float | None = None
    line_search: bool = True

    def resolve(self, problem: LocalProblem, rng: np.random.Generator | None = None) -> "DescentConfig":
        """Fill in the problem-dependent defaults and validate."""
        a_prime = (1.0 + problem.a) / 2.0 if self.a_prime is None else self.a_prime
        if not problem.a < a_prime < 1.0:
            raise DomainError(f"a' must satisfy a = {problem.a} < a' < 1, got {a_prime}")
        tau = self.tau
        if tau is None:
            l_sup = problem.l_sup
            if l_sup is None and problem.sampler is not None:
                rng = np.random.default_rng(0) if rng is None else rng
                l_sup = certify_assumptions(problem, rng, samples=32).l_sup
            if l_sup is None or l_sup >= problem.m:
                tau = math.inf
            else:
                m0 = 0.5 * (l_sup + problem.m)
                tau = (problem.m - m0) / ((1.0 - a_prime) * m0)
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if not 0 < self.step:
            raise DomainError(f"step must be positive, got {self.step}")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        step = min(self.step, tau)
        return replace(self, a_prime=a_prime, tau=tau, step=step, max_step=max(self.max_step, step))


@dataclass
class SolveResult:
    """Outcome and trace of one descent solve."""

    x: Any
    residuals: list[float]
    times: list[float]
    x_norms: list[float]
    flow_time: float
    converged: bool
    bound_ok: bool
    status: str
    y_norm: float
    initial_residual: float
    threshold: float
    a_prime: float
    tau: float
    rejected: int = 0

    @property
    def steps(self) -> int:
        return len(self.residuals) - 1

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def descent_step(problem: LocalProblem, x, y, h: float):
    """One explicit Euler step ``x + h L(x)(y - f(x))``.

    Raises :class:`RadiusBreach` if the new point leaves the open ball.
    """
    if not h > 0:
        raise DomainError(f"step must be positive, got {h}")
    if not problem.norm_x(x) < problem.R:
        raise RadiusBreach(f"start point outside the ball of radius {problem.R}")
    r = y - problem.f(x)
    x_new = x + h * problem.right_inverse(x, r)
    if not problem.norm_x(x_new) < problem.R:
        raise RadiusBreach(f"step of size {h} leaves the ball of radius {problem.R}")
    return x_new


def solve_local(problem: LocalProblem, y, cfg: DescentConfig | None = None, x0=None,
                check_radius: bool = True) -> SolveResult:
    """Solve ``f(x) = y`` by the descent flow.

    Without ``x0`` the flow starts at the origin and ``||y||`` must be below
    ``(1 - a) R / m``.  With a warm start the admissible ball is centred at
    ``f(x0)`` with radius ``(1 - a)(R - ||x0||) / m``.  ``check_radius=False``
    skips that gate (used by falsification probes only).
    """
    cfg = (cfg or DescentConfig()).resolve(problem)
    nx, ny = problem.norm_x, problem.norm_y
    warm = x0 is not None
    x = x0 if warm else problem.origin
    y_norm = float(ny(y))

    if warm:
        if not nx(x) < problem.R:
            raise OutOfRadiusError(f"warm start has norm {nx(x):.3e} >= R = {problem.R}")
        r = y - problem.f(x)
        res = float(ny(r))
        if check_radius and not res < problem.warm_radius(x):
            raise OutOfRadiusError(
                f"||y - f(x0)|| = {res:.3e} >= restart radius {problem.warm_radius(x):.3e}"
            )
    else:
        if check_radius and not y_norm < problem.target_radius:
            raise OutOfRadiusError(
                f"||y|| = {y_norm:.3e} >= admissible radius R' = {problem.target_radius:.3e}"
            )
        if y_norm == 0.0:
            return _result(problem, cfg, x, x, [0.0], [0.0], [float(nx(x))], "converged",
                           y_norm, 0.0, cfg.atol)
        r = y - problem.f(x)
        res = float(ny(r))

    start = x
    res0 = res
    # floor at the smallest normal double: a subnormal tol*||y|| cannot be resolved
    threshold = max(cfg.tol * y_norm + cfg.atol, sys.float_info.min)
    residuals, times, norms = [res], [0.0], [float(nx(x))]
    t, h = 0.0, cfg.step
    status = "max_steps"
    rejected = 0
    decrease = 1.0 - cfg.a_prime
    while True:
        if res <= threshold:
            status = "converged"
            break
        if len(residuals) > cfg.max_steps:
            break
        direction = problem.right_inverse(x, r)
        while True:
            x_new = x + h * direction
            breach = not nx(x_new) < problem.R
            if not breach:
                r_new = y - problem.f(x_new)
                res_new = float(ny(r_new))
                if not math.isfinite(res_new):
                    accepted = False
                elif cfg.line_search:
                    accepted = res_new <= (1.0 - 0.5 * decrease * h) * res
                else:
                    accepted = True
                if accepted:
                    break
            rejected += 1
            h *= 0.5
            if h < cfg.min_step:
                status = "radius_breach" if breach else "stalled"
                break
        if h < cfg.min_step:
            break
        x, r, res = x_new, r_new, res_new
        t += h
        residuals.append(res)
        times.append(t)
        norms.append(float(nx(x)))
        h = min(h * cfg.growth, cfg.max_step)

    return _result(problem, cfg, start, x, residuals, times, norms, status, y_norm, res0,
                   threshold, rejected, warm=warm, y=y)


def _result(problem, cfg, start, x, residuals, times, norms, status, y_norm, res0, threshold,
            rejected=0, warm=False, y=None):
    converged = status == "converged"
    if warm:
        bound = problem.selection_bound * res0
        moved = float(problem.norm_x(x - start))
    else:
        bound = problem.selection_bound * y_norm
        moved = float(problem.norm_x(x))
    return SolveResult(
        x=x,
        residuals=residuals,
        times=times,
        x_norms=norms,
        flow_time=times[-1],
        converged=converged,
        bound_ok=converged and moved <= bound * (1.0 + BOUND_SLACK),
        status=status,
        y_norm=y_norm,
        initial_residual=res0,
        threshold=threshold,
        a_prime=cfg.a_prime,
        tau=cfg.tau,
        rejected=rejected,
    )


def neumann_series(apply_df: Callable, apply_base: Callable, k, terms: int,
                   norm: Callable | None = None):
    """``L0 sum_{j<terms} P^j k`` with ``P = I - Df L0``.

    With ``norm`` given, a sampled contraction factor of ``P`` along the
    series that is not below one raises :class:`NeumannDivergenceError`.
    """
    if terms < 1:
        raise DomainError(f"terms must be >= 1, got {terms}")
    r = k
    q = apply_base(r)
    acc = q
    r_norms = [norm(r)] if norm is not None else None
    for _ in range(terms - 1):
        r = r - apply_df(q)
        if r_norms is not None:
            r_norms.append(norm(r))
            if r_norms[0] > 0 and r_norms[-1] > 1e6 * r_norms[0]:
                raise NeumannDivergenceError("Neumann series diverges")
            if r_norms[-1] <= 1e-17 * r_norms[0]:
                q = apply_base(r)
                acc = acc + q
                break
        q = apply_base(r)
        acc = acc + q
    if r_norms is not None and len(r_norms) >= 3 and r_norms[0] > 0:
        # ratio of the tail terms; roundoff-level terms carry no information
        a, b = r_norms[-2], r_norms[-1]
        if a > 1e-13 * r_norms[0] and b >= a:
            raise NeumannDivergenceError(
                f"Neumann series not contracting (last term ratio {b / a:.3g})"
            )
    return acc


def neumann_right_inverse(problem: LocalProblem, x, k, terms: int):
    """Exact-in-the-limit right-inverse ``L(x) sum_j P^j`` of ``Df(x)``, ``P = I - Df(x) L(x)``."""
    return neumann_series(lambda h: problem.df(x, h), lambda r: problem.right_inverse(x, r), k, terms)


def residual_decay_check(trace: SolveResult, a_prime: float | None = None) -> bool:
    """Check ``res(t) <= (1 - (1 - a') t) res(0) + 10 tol`` for ``t <= min(tau, 1/2)``."""
    a_prime = trace.a_prime if a_prime is None else a_prime
    horizon = min(trace.tau, 0.5)
    r0 = trace.residuals[0]
    slack = 10.0 * trace.threshold
    for t, r in zip(trace.times, trace.residuals):
        if t > horizon * (1.0 + 1e-12):
            break
        if r > (1.0 - (1.0 - a_prime) * t) * r0 + slack:
            return False
    return True


@dataclass
class AssumptionReport:
    """Sampled evidence for the right-inverse bound and the approximation defect."""

    samples: int
    l_sup: float
    defect: float
    f_origin: float

    def holds(self, problem: LocalProblem) -> bool:
        return self.l_sup < problem.m and self.defect <= problem.a and self.f_origin == 0.0


def certify_assumptions(problem: LocalProblem, rng: np.random.Generator, samples: int = 64,
                        perturbation: float = 1e-3) -> AssumptionReport:
    """Probe ``||L(x) k|| / ||k||`` and ``||(Df(x') L(x) - I) k|| / ||k||`` at random points.

    These are falsification checks: a sampled maximum can refute the
    assumptions but never certify them.
    """
    if problem.sampler is None:
        raise DomainError(f"problem {problem.name!r} has no sampler")
    l_sup = defect = 0.0
    for _ in range(samples):
        x, k = problem.sampler(rng)
        x2, _ = problem.sampler(rng)
        kn = problem.norm_y(k)
        if kn == 0:
            continue
        lk = problem.right_inverse(x, k)
        l_sup = max(l_sup, problem.norm_x(lk) / kn)
        x_near = x + perturbation * (x2 - x)
        defect = max(defect, problem.norm_y(problem.df(x_near, lk) - k) / kn)
    return AssumptionReport(samples, l_sup, defect, float(problem.norm_y(problem.f(problem.origin))))


def write_trace_csv(result: SolveResult, fh) -> None:
    """CSV rows ``step, flow_time, residual, x_norm``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "flow_time", "residual", "x_norm"])
    for i, (t, r, n) in enumerate(zip(result.times, result.residuals, result.x_norms)):
        w.writerow([i, f"{t:.17g}", f"{r:.17g}", f"{n:.17g}"])
