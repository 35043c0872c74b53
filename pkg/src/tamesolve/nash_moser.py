"""Galerkin iteration building a continuous right-inverse on a tame scale.

Level ``n`` solves the projected equation ``Pi_n F(u_n) = Pi_{n-1} v`` with
``u_n`` in the range ``E_n`` of ``Pi(lam_n)``, ``lam_n = lam0 sigma^n``.  The
increment ``z_n = u_n - u_{n-1}`` solves

    Pi_n (F(u_{n-1} + z) - F(u_{n-1})) = Delta_n v + e_n,

    Delta_n v = Pi_{n-1} (1 - Pi_{n-2}) v,    e_n = -Pi_n (1 - Pi_{n-1}) F(u_{n-1}),

by the local descent solver applied on ``E_n`` with right-inverse
``Pi_n L Pi_n``.  Base cases: ``Delta_1 v = Pi_0 v``, ``e_1 = 0``, ``u_0 = 0``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DomainError,
    InadmissibleError,
    LevelFailure,
    NeumannDivergenceError,
    OutOfRadiusError,
)
from .local import DescentConfig, LocalProblem, SolveResult, solve_local
from .scale import ScaleVector, complement, norm, project
from .tame import TameProblem, left_inverse_defect

__all__ = [
    "NashMoserConfig",
    "LevelState",
    "NashMoserResult",
    "UniquenessReport",
    "delta_v",
    "defect_e",
    "inner_solve",
    "run",
    "uniqueness_suite",
    "continuity_constant",
    "calibrate_radius",
    "fit_geometric_ratio",
    "write_level_csv",
]

INNER_DEFAULT = DescentConfig(step=0.25, tol=1e-12, atol=1e-13, max_steps=200)


@dataclass(frozen=True)
class NashMoserConfig:
    """Gradings, cutoff schedule and inner-solver settings.

    ``s_top`` is the top grading actually used (the scale's ``s_max`` must
    reach it).  ``r`` is the radius of the admissible target ball in the
    ``delta`` norm; the default was calibrated by bisection on the synthetic
    problem (see :func:`calibrate_radius`).
    """

    s0: float = 1.0
    s1: float = 3.0
    delta: float = 6.0
    s_top: float = 7.0
    lam0: float = 1.0
    sigma: float = 2.0
    levels: int = 10
    r: float = 0.005
    inner: DescentConfig = INNER_DEFAULT
    inner_radius: float = 1.0
    inner_a: float = 0.5
    m_safety: float = 1.5
    probes: int = 4
    seed: int = 0

    def cutoff(self, n: int) -> float:
        """``lam_n``; ``n = -1`` means the zero projector and returns 0."""
        if n < 0:
            return 0.0
        return self.lam0 * self.sigma ** n

    def validate(self, p: TameProblem, uniqueness: bool = False) -> None:
        if not self.lam0 >= 1.0:
            raise DomainError(f"lam0 must be >= 1, got {self.lam0}")
        if not self.sigma > 1.0:
            raise DomainError(f"sigma must be > 1, got {self.sigma}")
        if self.levels < 1:
            raise DomainError("levels must be >= 1")
        if self.s0 != p.s0:
            raise DomainError(f"config s0 = {self.s0} differs from the problem's s0 = {p.s0}")
        need = self.s0 + max(p.m_loss, p.ell)
        if uniqueness:
            need = max(need, self.s0 + max(2 * p.m_loss + p.ell_prime, p.m_loss + p.ell))
        if not self.s1 >= need:
            raise DomainError(f"s1 = {self.s1} must be >= {need}")
        if not self.delta > self.s1 + p.ell_prime:
            raise DomainError(f"delta = {self.delta} must exceed s1 + l' = {self.s1 + p.ell_prime}")
        if not self.s_top >= self.delta:
            raise DomainError(f"s_top = {self.s_top} must be >= delta = {self.delta}")
        if not self.s_top <= p.scale.s_max:
            raise DomainError(f"s_top = {self.s_top} exceeds the scale's s_max = {p.scale.s_max}")
        top = self.cutoff(self.levels)
        if not top <= p.scale.weight(p.scale.k_max) * (1 + 1e-12):
            raise DomainError(
                f"schedule reaches lam_N = {top:g} beyond the truncation weight "
                f"{p.scale.weight(p.scale.k_max):g}; raise k_max or lower levels/sigma"
            )
        if not self.r > 0:
            raise DomainError("r must be positive")


@dataclass
class LevelState:
    n: int
    cutoff: float
    u: ScaleVector = field(repr=False)
    z: ScaleVector = field(repr=False)
    e: ScaleVector = field(repr=False)
    dv: ScaleVector = field(repr=False)
    z_norm_s1: float
    e_norm_s0: float
    rhs_norm_s0: float
    identity_residual: float
    u_norm_s1: float
    inner_steps: int
    inner_m: float | None = None
    inner: SolveResult | None = field(default=None, repr=False)


@dataclass
class NashMoserResult:
    G: ScaleVector
    states: list[LevelState]
    v_norm_delta: float
    r: float
    converged: bool
    failure: str | None = None

    @property
    def G_norm_s1(self) -> float:
        return self.states[-1].u_norm_s1 if self.states else 0.0

    def bound_ok(self, slack: float = 1e-6) -> bool:
        """``||G(v)||_{s1} <= ||v||_delta / r``."""
        return self.G_norm_s1 <= self.v_norm_delta / self.r * (1 + slack)

    def max_identity_residual(self) -> float:
        return max((s.identity_residual for s in self.states), default=0.0)


def delta_v(v: ScaleVector, n: int, cfg: NashMoserConfig) -> ScaleVector:
    """Annular slice ``Pi_{n-1}(1 - Pi_{n-2}) v`` (``Pi_0 v`` at ``n = 1``)."""
    if n < 1:
        raise DomainError(f"level index must be >= 1, got {n}")
    top = project(v, cfg.cutoff(n - 1))
    if n == 1:
        return top
    return complement(top, cfg.cutoff(n - 2))


def defect_e(p: TameProblem, u_prev: ScaleVector, n: int, cfg: NashMoserConfig,
             F_prev: ScaleVector | None = None) -> ScaleVector:
    """``-Pi_n (1 - Pi_{n-1}) F(u_{n-1})``; zero at ``n = 1``."""
    if n < 1:
        raise DomainError(f"level index must be >= 1, got {n}")
    if n == 1:
        return u_prev.spec.zeros()
    Fu = p.F(u_prev) if F_prev is None else F_prev
    return -complement(project(Fu, cfg.cutoff(n)), cfg.cutoff(n - 1))


def _level_problem(p: TameProblem, u_prev: ScaleVector, F_prev: ScaleVector, lam: float,
                   cfg: NashMoserConfig, rhs: ScaleVector) -> LocalProblem:
    """Local problem on ``E_n`` with assumptions re-sampled around ``z = 0``."""
    s0 = cfg.s0

    def f(z):
        return project(p.F(u_prev + z) - F_prev, lam)

    def df(z, h):
        return project(p.DF(u_prev + z, h), lam)

    def L(z, k):
        return project(p.L(u_prev + z, project(k, lam)), lam)

    def nrm(x):
        return norm(x, s0)

    spec = u_prev.spec
    rng = np.random.default_rng(cfg.seed)
    mask = spec.cutoff_mask(lam)
    kept = np.flatnonzero(mask)
    top = kept[np.argsort(spec.weights[kept])[-2:]]
    probes = [rhs]
    for i in top:
        c = np.zeros(spec.size, dtype=complex)
        c[i] = 1.0
        probes.append(ScaleVector(spec, c))
    for _ in range(cfg.probes):
        c = np.where(mask, rng.standard_normal(spec.size) + 1j * rng.standard_normal(spec.size), 0)
        probes.append(ScaleVector(spec, c))
    zero = spec.zeros()
    l_est = defect = 0.0
    try:
        for k in probes:
            kn = nrm(k)
            if kn == 0:
                continue
            lk = L(zero, k)
            l_est = max(l_est, nrm(lk) / kn)
            defect = max(defect, nrm(df(1e-3 * lk / max(nrm(lk), 1.0), lk) - k) / kn)
    except NeumannDivergenceError as exc:
        raise InadmissibleError(f"right-inverse diverges on E(lam={lam:g}): {exc}") from exc
    if defect > cfg.inner_a:
        raise InadmissibleError(
            f"sampled right-inverse defect {defect:.3g} exceeds a = {cfg.inner_a} on E(lam={lam:g})"
        )
    m = cfg.m_safety * l_est
    return LocalProblem(
        f=f, df=df, right_inverse=L, origin=zero, R=cfg.inner_radius, m=m, a=cfg.inner_a,
        l_sup=l_est, norm_x=nrm, norm_y=nrm, name=f"level(lam={lam:g})",
    )


def inner_solve(p: TameProblem, u_prev: ScaleVector, rhs: ScaleVector, n: int,
                cfg: NashMoserConfig, F_prev: ScaleVector | None = None):
    """Small solution ``z`` in ``E_n`` of ``Pi_n(F(u_prev + z) - F(u_prev)) = rhs``.

    Returns ``(z, solve_result)``; ``solve_result`` is None when ``rhs = 0``.
    """
    lam = cfg.cutoff(n)
    if rhs.is_zero():
        return u_prev.spec.zeros(), None
    Fu = p.F(u_prev) if F_prev is None else F_prev
    try:
        local = _level_problem(p, u_prev, Fu, lam, cfg, rhs)
        res = solve_local(local, rhs, cfg.inner)
    except (InadmissibleError, OutOfRadiusError) as exc:
        raise LevelFailure(n, str(exc)) from exc
    except NeumannDivergenceError as exc:
        raise LevelFailure(n, f"right-inverse diverged during the flow: {exc}") from exc
    if not res.converged:
        raise LevelFailure(n, f"inner solve ended with status {res.status} "
                              f"(residual {res.residual:.3e})", res)
    return res.x, res


def run(p: TameProblem, v: ScaleVector, cfg: NashMoserConfig | None = None) -> NashMoserResult:
    """Levels ``1..N`` of the Galerkin iteration; returns ``G(v) = u_N`` and the level log.

    A level failure ends the run early with ``converged = False`` and the
    states computed so far.
    """
    cfg = cfg or NashMoserConfig()
    cfg.validate(p)
    v_norm = norm(v, cfg.delta)
    if not v_norm < cfg.r:
        raise OutOfRadiusError(f"||v||_delta = {v_norm:.3e} >= r = {cfg.r}")
    u = p.zero()
    Fu = p.F(u)
    states: list[LevelState] = []
    for n in range(1, cfg.levels + 1):
        lam = cfg.cutoff(n)
        dv = delta_v(v, n, cfg)
        e = defect_e(p, u, n, cfg, F_prev=Fu)
        rhs = dv + e
        try:
            z, res = inner_solve(p, u, rhs, n, cfg, F_prev=Fu)
        except LevelFailure as exc:
            exc.states = states
            return NashMoserResult(u, states, v_norm, cfg.r, False, str(exc))
        u = project(u + z, lam)
        Fu = p.F(u)
        ident = norm(project(Fu, lam) - project(v, cfg.cutoff(n - 1)), cfg.s0)
        states.append(LevelState(
            n=n, cutoff=lam, u=u, z=z, e=e, dv=dv,
            z_norm_s1=norm(z, cfg.s1),
            e_norm_s0=norm(e, cfg.s0),
            rhs_norm_s0=norm(rhs, cfg.s0),
            identity_residual=ident,
            u_norm_s1=norm(u, cfg.s1),
            inner_steps=0 if res is None else res.steps,
            inner=res,
        ))
    return NashMoserResult(u, states, v_norm, cfg.r, True)


def fit_geometric_ratio(values, floor: float = 0.0) -> float:
    """Least-squares ratio ``q`` of ``values[n] ~ C q^n`` over the entries above ``floor``."""
    vals = np.asarray(values, dtype=float)
    idx = np.flatnonzero(vals > floor)
    if idx.size < 2:
        return math.nan
    slope = np.polyfit(idx.astype(float), np.log(vals[idx]), 1)[0]
    return float(math.exp(slope))


@dataclass
class UniquenessReport:
    max_deviation: float
    deviations: list[float]
    excluded: list[tuple[int, str]]
    left_defect: float


def uniqueness_suite(p: TameProblem, v_grid, cfg_a: NashMoserConfig, cfg_b: NashMoserConfig,
                     left_samples: int = 3) -> UniquenessReport:
    """Largest ``||G_A(v) - G_B(v)||_{s1}`` between two schedules over a grid of targets.

    Requires the stronger grading of the uniqueness setting and a sampled
    left-inverse certificate; failed runs are excluded and reported.
    """
    cfg_a.validate(p, uniqueness=True)
    cfg_b.validate(p, uniqueness=True)
    rng = np.random.default_rng(cfg_a.seed)
    left = 0.0
    from .tame import random_ball_vector

    for _ in range(left_samples):
        u = random_ball_vector(p.scale, rng, p.s0 + p.m_loss, 1e-3, decay=p.s0 + 3.0)
        h = random_ball_vector(p.scale, rng, p.s0 + p.m_loss + p.ell_prime, 1.0, decay=p.s0 + 4.0)
        left = max(left, left_inverse_defect(p, u, h))
    if left > 1e-8:
        raise InadmissibleError(f"sampled left-inverse defect {left:.3e} too large")
    s1 = max(cfg_a.s1, cfg_b.s1)
    devs, excluded = [], []
    for i, v in enumerate(v_grid):
        try:
            ra, rb = run(p, v, cfg_a), run(p, v, cfg_b)
        except OutOfRadiusError as exc:
            excluded.append((i, str(exc)))
            continue
        if not (ra.converged and rb.converged):
            excluded.append((i, ra.failure or rb.failure))
            continue
        devs.append(norm(ra.G - rb.G, s1))
    return UniquenessReport(max(devs, default=math.nan), devs, excluded, left)


def continuity_constant(p: TameProblem, v: ScaleVector, cfg: NashMoserConfig,
                        directions, rel_step: float = 1e-3) -> float:
    """Sampled ``max ||G(v) - G(v')||_{s1} / ||v - v'||_delta`` for ``||v - v'||_delta = rel_step r``."""
    base = run(p, v, cfg)
    if not base.converged:
        raise LevelFailure(len(base.states) + 1, base.failure or "base run failed")
    worst = 0.0
    for d in directions:
        dn = norm(d, cfg.delta)
        step = d * (rel_step * cfg.r / dn)
        other = run(p, v + step, cfg)
        if not other.converged:
            raise LevelFailure(len(other.states) + 1, other.failure or "perturbed run failed")
        worst = max(worst, norm(other.G - base.G, cfg.s1) / norm(step, cfg.delta))
    return worst


def calibrate_radius(p: TameProblem, direction: ScaleVector, cfg: NashMoserConfig,
                     hi: float = 4.0, iterations: int = 20,
                     fractions=(0.25, 0.5, 0.99)) -> float:
    """Bisection for the largest ``r`` such that targets ``t v_hat`` with ``t < r`` all converge
    and satisfy ``||G||_{s1} <= t / r``, along one direction ``v_hat``.

    An empirical surrogate for the radius whose existence is only asserted.
    """
    v_hat = direction * (1.0 / norm(direction, cfg.delta))

    def ok(r):
        c = replace(cfg, r=r)
        for frac in fractions:
            t = frac * r
            res = run(p, v_hat * t, c)
            if not res.converged or not res.bound_ok():
                return False
        return True

    lo = 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def write_level_csv(result: NashMoserResult, fh) -> None:
    """CSV rows ``n, cutoff, z_norm_s1, e_norm_s0, identity_residual, G_norm_s1``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "cutoff", "z_norm_s1", "e_norm_s0", "identity_residual", "G_norm_s1"])
    for s in result.states:
        w.writerow([s.n] + [f"{x:.17g}" for x in
                            (s.cutoff, s.z_norm_s1, s.e_norm_s0, s.identity_residual, s.u_norm_s1)])
