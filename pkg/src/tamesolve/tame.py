"""Tame problems on a Fourier scale and randomized checks of their estimates."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError
from .scale import ScaleSpec, ScaleVector, norm, random_vector

__all__ = [
    "TameProblem",
    "verify_tame_direct",
    "verify_tame_inverse",
    "right_inverse_defect",
    "left_inverse_defect",
    "derivative_consistency",
    "modulus_ladder",
    "random_ball_vector",
]


class TameProblem:
    """Interface for ``F: V -> W`` with tame derivative and tame right-inverse.

    Subclasses provide ``F``, ``DF`` and ``L`` on :class:`ScaleVector` and set
    the loss parameters.  Domain and target scale coincide here.

    Attributes
    ----------
    scale : ScaleSpec
    s0 : float
        Base grading.
    m_loss : float
        Derivatives lost by ``DF``.
    ell, ell_prime : float
        Losses of the right-inverse in ``u`` and in ``k``.
    a_direct, b_inverse : float
        Frozen constants of the direct and inverse tame estimates.
    """

    scale: ScaleSpec
    s0: float
    m_loss: float
    ell: float
    ell_prime: float
    a_direct: float
    b_inverse: float

    def F(self, u: ScaleVector) -> ScaleVector:
        raise NotImplementedError

    def DF(self, u: ScaleVector, h: ScaleVector) -> ScaleVector:
        raise NotImplementedError

    def L(self, u: ScaleVector, k: ScaleVector) -> ScaleVector:
        raise NotImplementedError

    @property
    def target_scale(self) -> ScaleSpec:
        return self.scale

    def zero(self) -> ScaleVector:
        return self.scale.zeros()


def random_ball_vector(spec: ScaleSpec, rng: np.random.Generator, s: float, radius: float,
                       n_modes: int | None = None, decay: float | None = None) -> ScaleVector:
    """Random vector with ``||u||_s`` uniform in ``(0, radius)``."""
    decay = rng.uniform(s, s + 3.0) if decay is None else decay
    u = random_vector(spec, rng, n_modes, decay=decay)
    return u * (radius * rng.uniform(0.05, 1.0) / norm(u, s))


def verify_tame_direct(p: TameProblem, trials: int, rng: np.random.Generator,
                       u_radius: float = 1.0) -> float:
    """Worst sampled ratio ``||DF(u)h||_s / (||h||_{s+m} + ||u||_{s+m} ||h||_{s0+m})``."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    spec, m = p.scale, p.m_loss
    s_hi = spec.s_max - m
    worst = 0.0
    for _ in range(trials):
        u = random_ball_vector(spec, rng, p.s0 + m, u_radius)
        h = random_vector(spec, rng, decay=rng.uniform(0.0, spec.s_max + 1.0))
        s = rng.uniform(p.s0, s_hi)
        num = norm(p.DF(u, h), s)
        den = norm(h, s + m) + norm(u, s + m) * norm(h, p.s0 + m)
        worst = max(worst, num / den)
    return worst


def verify_tame_inverse(p: TameProblem, trials: int, rng: np.random.Generator,
                        u_radius: float = 1.0) -> float:
    """Worst sampled ratio ``||L(u)k||_s / (||k||_{s+l'} + ||k||_{s0+l'} ||u||_{s+l})``."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    spec = p.scale
    lmax = max(p.ell, p.ell_prime)
    worst = 0.0
    for _ in range(trials):
        u = random_ball_vector(spec, rng, p.s0 + max(p.m_loss, p.ell), u_radius)
        k = random_vector(spec, rng, decay=rng.uniform(0.0, spec.s_max + 1.0))
        s = rng.uniform(p.s0, spec.s_max - lmax)
        num = norm(p.L(u, k), s)
        den = norm(k, s + p.ell_prime) + norm(k, p.s0 + p.ell_prime) * norm(u, s + p.ell)
        worst = max(worst, num / den)
    return worst


def right_inverse_defect(p: TameProblem, u: ScaleVector, k: ScaleVector, s: float | None = None) -> float:
    """Relative defect ``||DF(u) L(u) k - k||_s / ||k||_s``."""
    s = p.s0 if s is None else s
    return norm(p.DF(u, p.L(u, k)) - k, s) / norm(k, s)


def left_inverse_defect(p: TameProblem, u: ScaleVector, h: ScaleVector, s: float | None = None) -> float:
    """Relative defect ``||L(u) DF(u) h - h||_s / ||h||_s``."""
    s = p.s0 if s is None else s
    return norm(p.L(u, p.DF(u, h)) - h, s) / norm(h, s)


def derivative_consistency(f: Callable, df: Callable, x, h, step: float = 1e-5,
                           norm_y: Callable | None = None) -> float:
    """Relative error of the central difference ``(f(x+th) - f(x-th)) / 2t`` against ``Df(x)h``."""
    norm_y = norm_y or (lambda v: float(np.linalg.norm(np.ravel(np.asarray(v)))))
    fd = (f(x + step * h) - f(x - step * h)) * (1.0 / (2.0 * step))
    exact = df(x, h)
    return norm_y(fd - exact) / norm_y(exact)


def modulus_ladder(p: TameProblem, u1: ScaleVector, h: ScaleVector, s: float | None = None,
                   depth: int = 8) -> list[float]:
    """Remainder ratios ``||F(u2) - F(u1) - DF(u1)(u2-u1)||_s / ||u2-u1||_{s0+m}``.

    ``u2 = u1 + 2^{-j} h`` for ``j = 1..depth``.  A differentiability modulus
    tending to zero shows up as a decreasing sequence.
    """
    s = p.s0 if s is None else s
    Fu1 = p.F(u1)
    ratios = []
    for j in range(1, depth + 1):
        d = h * 2.0 ** -j
        rem = p.F(u1 + d) - Fu1 - p.DF(u1, d)
        ratios.append(norm(rem, s) / norm(d, p.s0 + p.m_loss))
    return ratios
