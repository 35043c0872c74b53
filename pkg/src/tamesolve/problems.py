"""Concrete problems: the complex polynomial, the pointwise superposition
operator, and a synthetic operator whose linearization loses derivatives.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, InadmissibleError, OracleError
from .local import LocalProblem, neumann_series, sup_norm
from .scale import ScaleSpec, ScaleVector, norm
from .tame import TameProblem

__all__ = [
    "examplea_f",
    "examplea_df",
    "examplea_closed_inverse",
    "ExampleA",
    "root_census",
    "polynomial_roots",
    "NemytskiiProblem",
    "nemytskii_apply",
    "nemytskii_exact_inverse",
    "SyntheticLossProblem",
    "cube_direct",
    "manufactured_target",
    "manufactured_solution",
]


# ---------------------------------------------------------------------------
# polynomial example: f(z) = (2 + z)^n - 2^n on the unit disc


def _clog1p(z: complex) -> complex:
    x, y = z.real, z.imag
    return complex(0.5 * math.log1p(x * (2.0 + x) + y * y), math.atan2(y, 1.0 + x))


def _cexpm1(w: complex) -> complex:
    x, y = w.real, w.imag
    s = math.sin(0.5 * y)
    return complex(math.expm1(x) * math.cos(y) - 2.0 * s * s, math.exp(x) * math.sin(y))


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")


def examplea_f(n: int, z) -> complex:
    """``(2 + z)^n - 2^n``, evaluated as ``2^n expm1(n log1p(z/2))`` to avoid cancellation."""
    _check_n(n)
    z = complex(z)
    if not abs(z) < 1.0:
        raise DomainError(f"|z| = {abs(z)} outside the unit disc")
    return 2.0 ** n * _cexpm1(n * _clog1p(0.5 * z))


def examplea_df(n: int, z) -> complex:
    """Derivative ``n (2 + z)^{n-1}``."""
    z = complex(z)
    return n * 2.0 ** (n - 1) * cmath.exp((n - 1) * _clog1p(0.5 * z))


def examplea_closed_inverse(n: int, Z) -> complex:
    """Principal-branch selection ``2((1 + 2^-n Z)^{1/n} - 1)``."""
    _check_n(n)
    Z = complex(Z)
    if not abs(Z) < 2.0 ** n:
        raise DomainError(f"|Z| = {abs(Z)} must be below 2^n")
    w = Z * 2.0 ** -n
    if w.imag == 0.0 and w.real <= -1.0:
        raise DomainError("1 + 2^-n Z lies on the branch cut")
    return 2.0 * _cexpm1(_clog1p(w) / n)


@dataclass(frozen=True)
class ExampleA:
    """``f(z) = (2 + z)^n - 2^n`` on ``|z| < R`` with ``L(z) = 1 / (n (2+z)^{n-1})``.

    ``sup |L| = 1/n`` on the unit disc, so any ``m > 1/n`` is admissible; the
    defaults ``m = 1.2/n``, ``a = 0.25`` give the target radius ``0.625 n``.
    With ``dps`` set, arithmetic runs in an mpmath context of that many digits
    (needed near the non-principal roots for large ``n``, where ``f`` cannot
    be resolved in double precision).
    """

    n: int
    R: float = 1.0
    m: float | None = None
    a: float = 0.25
    dps: int | None = None

    def __post_init__(self):
        _check_n(self.n)
        if not 0 < self.R <= 1.0:
            raise DomainError(f"R must lie in (0, 1], got {self.R}")

    @property
    def m_value(self) -> float:
        return 1.2 / self.n if self.m is None else self.m

    @cached_property
    def ctx(self):
        if self.dps is None:
            return None
        import mpmath

        ctx = mpmath.MPContext()
        ctx.dps = self.dps
        return ctx

    def point(self, z):
        """Convert to the working number type."""
        return self.ctx.mpc(z) if self.ctx is not None else complex(z)

    def f(self, z):
        if self.ctx is None:
            return examplea_f(self.n, z)
        c = self.ctx
        z = c.mpc(z)
        return (2 + z) ** self.n - c.mpf(2) ** self.n

    def df(self, z, h):
        if self.ctx is None:
            return examplea_df(self.n, z) * h
        z = self.ctx.mpc(z)
        return self.n * (2 + z) ** (self.n - 1) * h

    def right_inverse(self, z, k):
        if self.ctx is None:
            return k / examplea_df(self.n, z)
        z = self.ctx.mpc(z)
        return k / (self.n * (2 + z) ** (self.n - 1))

    def closed_inverse(self, Z):
        if self.ctx is None:
            return examplea_closed_inverse(self.n, Z)
        c = self.ctx
        return 2 * (c.exp(c.log(1 + c.mpc(Z) / c.mpf(2) ** self.n) / self.n) - 1)

    def roots(self, Z) -> np.ndarray:
        """All ``n`` solutions of ``f(z) = Z`` from the companion-matrix oracle."""
        return examplea_roots(self.n, Z)

    def _sample(self, rng):
        z = 0.999 * self.R * math.sqrt(rng.uniform()) * cmath.exp(2j * math.pi * rng.uniform())
        k = complex(rng.standard_normal(), rng.standard_normal())
        return z, k

    def local_problem(self) -> LocalProblem:
        norm_fn = abs if self.ctx is None else (lambda v: self.ctx.mpf(abs(v)))
        return LocalProblem(
            f=self.f,
            df=self.df,
            right_inverse=self.right_inverse,
            origin=self.point(0),
            R=self.R,
            m=self.m_value,
            a=self.a,
            lip=self.n * (2.0 + self.R) ** (self.n - 1),
            l_sup=1.0 / (self.n * (2.0 - self.R) ** (self.n - 1)),
            norm_x=norm_fn,
            norm_y=norm_fn,
            sampler=self._sample if self.ctx is None else None,
            name=f"examplea(n={self.n})",
        )


def polynomial_roots(coeffs) -> np.ndarray:
    """Roots of ``sum_j coeffs[j] w^(deg-j)`` as eigenvalues of the companion matrix."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "f")
    if c.size < 2:
        return np.zeros(0, dtype=complex)
    c = c / c[0]
    deg = c.size - 1
    comp = np.zeros((deg, deg), dtype=complex)
    comp[0, :] = -c[1:]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    return np.linalg.eigvals(comp)


def examplea_roots(n: int, Z) -> np.ndarray:
    """All roots of ``(2+z)^n - 2^n = Z``.

    The polynomial is written in the shifted, rescaled variable
    ``w = (2 + z) / rho`` with ``rho = |2^n + Z|^{1/n}``, where it reads
    ``w^n - c`` with ``|c| = 1``.  Without the rescaling the companion matrix
    carries an entry of size ``2^n`` and the eigenvalues lose digits.
    """
    _check_n(n)
    c = 2.0 ** n + complex(Z)
    if c == 0:
        return np.full(n, -2.0, dtype=complex)
    rho = abs(c) ** (1.0 / n)
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    coeffs[-1] = -c / abs(c)
    return rho * polynomial_roots(coeffs) - 2.0


def root_census(n: int, Z, radius: float) -> int:
    """Number of solutions of ``(2+z)^n - 2^n = Z`` in the closed disc ``|z| <= radius``.

    Roots within ``1e-12 * max(1, radius)`` of the boundary count as inside.
    """
    _check_n(n)
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    roots = examplea_roots(n, Z)
    return int(np.count_nonzero(np.abs(roots) <= radius + 1e-12 * max(1.0, radius)))


# ---------------------------------------------------------------------------
# superposition operator u -> phi(u) on a periodic grid

_PHI = {
    # name: (phi, phi', inf phi', sup phi') as functions of the coupling c
    "sine": (
        lambda t, c: t + c * np.sin(t),
        lambda t, c: 1.0 + c * np.cos(t),
        lambda c: 1.0 - c,
        lambda c: 1.0 + c,
    ),
    "arctan": (
        lambda t, c: t + c * np.arctan(t),
        lambda t, c: 1.0 + c / (1.0 + t * t),
        lambda c: 1.0,
        lambda c: 1.0 + c,
    ),
}


@dataclass(frozen=True)
class NemytskiiProblem:
    """``Phi(u) = phi o u`` on a grid of ``grid_size`` points, sup norm.

    ``phi(t) = t + c sin t`` (``kind="sine"``, default ``c = 0.45``) or
    ``t + c arctan t``; both vanish at 0 and have ``phi'`` bounded away from 0.
    """

    grid_size: int = 1024
    kind: str = "sine"
    coupling: float = 0.45
    R: float = 10.0
    m: float | None = None
    a: float = 0.5

    def __post_init__(self):
        if self.kind not in _PHI:
            raise DomainError(f"unknown phi kind {self.kind!r}; choose from {sorted(_PHI)}")
        if self.grid_size < 1:
            raise DomainError("grid_size must be >= 1")
        if not self.inf_phi_prime > 0:
            raise DomainError(f"inf phi' = {self.inf_phi_prime} must be positive")

    @property
    def inf_phi_prime(self) -> float:
        return _PHI[self.kind][2](self.coupling)

    @property
    def sup_phi_prime(self) -> float:
        return _PHI[self.kind][3](self.coupling)

    @property
    def m_value(self) -> float:
        return 1.1 / self.inf_phi_prime if self.m is None else self.m

    def phi(self, t):
        return _PHI[self.kind][0](t, self.coupling)

    def phi_prime(self, t):
        return _PHI[self.kind][1](t, self.coupling)

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.grid_size,):
            raise DomainError(f"grid function has shape {u.shape}, expected ({self.grid_size},)")
        return u

    def apply(self, u):
        return self.phi(self._check(u))

    def df(self, u, h):
        return self.phi_prime(self._check(u)) * h

    def right_inverse(self, u, k):
        return k / self.phi_prime(self._check(u))

    def exact_inverse(self, v, tol: float = 1e-14):
        """Pointwise ``psi = phi^{-1}`` by bracketed bisection.

        Since ``phi(t)/t`` lies in ``[inf phi', sup phi']`` the root of
        ``phi(t) = v`` is bracketed by ``v / sup phi'`` and ``v / inf phi'``.
        """
        v = self._check(v)
        lo_d, hi_d = self.inf_phi_prime, self.sup_phi_prime
        a = np.minimum(v / lo_d, v / hi_d)
        b = np.maximum(v / lo_d, v / hi_d)
        for _ in range(200):
            mid = 0.5 * (a + b)
            above = self.phi(mid) > v
            b = np.where(above, mid, b)
            a = np.where(above, a, mid)
            if np.all(b - a <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
                break
        t = 0.5 * (a + b)
        err = np.max(np.abs(self.phi(t) - v), initial=0.0)
        if not err <= tol * max(1.0, float(np.max(np.abs(v), initial=0.0))):
            raise OracleError(f"scalar inversion residual {err:.3e} above {tol:.1e}")
        return t

    def _sample(self, rng):
        x = rng.uniform(-0.99 * self.R, 0.99 * self.R, size=self.grid_size)
        return x, rng.standard_normal(self.grid_size)

    def local_problem(self) -> LocalProblem:
        return LocalProblem(
            f=self.apply,
            df=self.df,
            right_inverse=self.right_inverse,
            origin=np.zeros(self.grid_size),
            R=self.R,
            m=self.m_value,
            a=self.a,
            lip=self.sup_phi_prime,
            l_sup=1.0 / self.inf_phi_prime,
            norm_x=sup_norm,
            norm_y=sup_norm,
            sampler=self._sample,
            name=f"nemytskii({self.kind}, c={self.coupling})",
        )


def nemytskii_apply(p: NemytskiiProblem, u):
    return p.apply(u)


def nemytskii_exact_inverse(p: NemytskiiProblem, v):
    return p.exact_inverse(v)


# ---------------------------------------------------------------------------
# synthetic loss-of-derivatives operator F(u) = Lambda_{-l'} u + eps u^3


def cube_direct(c: np.ndarray) -> np.ndarray:
    """Coefficients of ``u^3`` by exact discrete convolution (no aliasing).

    Input has modes ``-K..K``; output has modes ``-3K..3K``.
    """
    c = np.asarray(c, dtype=complex)
    return np.convolve(np.convolve(c, c), c)


@dataclass(frozen=True)
class SyntheticLossProblem(TameProblem):
    """``F(u) = Lambda_{-l'} u + eps u^3`` with ``Lambda_{-l'}`` the multiplier ``w(k)^{-l'}``.

    ``DF(u) h = Lambda_{-l'} h + 3 eps u^2 h``.  The right-inverse is the
    Neumann series around ``Lambda_{l'}``; on a truncation with top weight
    ``W`` it converges roughly when ``3 eps sup|u|^2 W^{l'} < 1``.  Products
    are formed on a grid of ``4 k_max + 2`` points, which is alias-free for
    cubes.

    The frozen tame constants come from randomized sweeps (seed 0, 1000
    trials, ``u`` in the ``0.05`` ball, ``k_max = 32``) with a margin.
    """

    k_max: int = 32
    ell_prime: float = 2.0
    eps: float = 0.01
    s0: float = 1.0
    m_loss: float = 0.0
    ell: float = 2.0
    s_max: float = 7.0
    neumann_terms: int = 40
    a_direct: float = 1.05
    b_inverse: float = 1.1
    scale: ScaleSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.ell_prime < 0 or self.ell < 0 or self.m_loss < 0:
            raise DomainError("losses must be nonnegative")
        if self.neumann_terms < 1:
            raise DomainError("neumann_terms must be >= 1")
        object.__setattr__(self, "scale", ScaleSpec(self.k_max, self.s_max))

    @cached_property
    def multiplier(self) -> np.ndarray:
        """``lambda(k) = w(k)^{-l'}``."""
        return self.scale.weights ** -self.ell_prime

    @cached_property
    def grid_points(self) -> int:
        return 4 * self.k_max + 2

    def to_grid(self, c: np.ndarray) -> np.ndarray:
        K, M = self.k_max, self.grid_points
        pad = np.zeros(M, dtype=complex)
        pad[: K + 1] = c[K:]
        pad[M - K:] = c[:K]
        return np.fft.ifft(pad) * M

    def from_grid(self, g: np.ndarray) -> np.ndarray:
        K, M = self.k_max, self.grid_points
        gh = np.fft.fft(g) / M
        return np.concatenate([gh[M - K:], gh[: K + 1]])

    def _vec(self, c) -> ScaleVector:
        return ScaleVector(self.scale, c)

    def F(self, u: ScaleVector) -> ScaleVector:
        ug = self.to_grid(u.coeffs)
        return self._vec(self.multiplier * u.coeffs + self.eps * self.from_grid(ug ** 3))

    def _df_grid(self, u2g: np.ndarray, h: ScaleVector) -> ScaleVector:
        prod = self.from_grid(u2g * self.to_grid(h.coeffs))
        return self._vec(self.multiplier * h.coeffs + 3.0 * self.eps * prod)

    def DF(self, u: ScaleVector, h: ScaleVector) -> ScaleVector:
        return self._df_grid(self.to_grid(u.coeffs) ** 2, h)

    def base_inverse(self, k: ScaleVector) -> ScaleVector:
        """``Lambda_{l'} k``, the exact inverse of the linear part."""
        return self._vec(k.coeffs / self.multiplier)

    def L(self, u: ScaleVector, k: ScaleVector) -> ScaleVector:
        u2g = self.to_grid(u.coeffs) ** 2
        return neumann_series(
            lambda q: self._df_grid(u2g, q),
            self.base_inverse,
            k,
            self.neumann_terms,
            norm=lambda r: norm(r, self.s0),
        )

    def contraction(self, u: ScaleVector, iterations: int = 30, seed: int = 0) -> float:
        """Power-iteration estimate of the spectral radius of ``P = -3 eps u^2 Lambda_{l'}``."""
        rng = np.random.default_rng(seed)
        u2g = self.to_grid(u.coeffs) ** 2
        x = rng.standard_normal(self.scale.size) + 1j * rng.standard_normal(self.scale.size)
        x /= np.linalg.norm(x)
        est = 0.0
        for _ in range(iterations):
            y = -3.0 * self.eps * self.from_grid(u2g * self.to_grid(x / self.multiplier))
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0
            est = ny
            x = y / ny
        return float(est)

    def check_admissible(self, u: ScaleVector, limit: float = 0.9) -> float:
        q = self.contraction(u)
        if not q < limit:
            raise InadmissibleError(
                f"Neumann contraction {q:.3g} >= {limit} at ||u||_s0 = {norm(u, self.s0):.3g}; "
                "reduce eps or the amplitude"
            )
        return q

    def lift(self, u: ScaleVector) -> ScaleVector:
        """Embed a vector from a coarser scale into this one."""
        if u.spec.k_max > self.k_max:
            extra = np.abs(u.spec.modes) > self.k_max
            if np.any(u.coeffs[extra]):
                raise DomainError("vector has modes beyond this problem's truncation")
            return self.scale.vector({int(k): c for k, c in zip(u.spec.modes[~extra], u.coeffs[~extra])})
        c = np.zeros(self.scale.size, dtype=complex)
        off = self.k_max - u.spec.k_max
        c[off: off + u.spec.size] = u.coeffs
        return self._vec(c)


def manufactured_target(p: SyntheticLossProblem, u_star: ScaleVector) -> ScaleVector:
    """``F(u*)`` by exact convolution on the full (3x wider) support of the cube.

    Independent of the FFT path of :meth:`SyntheticLossProblem.F`.  Raises
    if ``F(u*)`` has modes beyond the problem truncation.
    """
    K = u_star.spec.k_max
    support = u_star.support()
    k_u = int(np.max(np.abs(support))) if support.size else 0
    c = u_star.coeffs[K - k_u: K + k_u + 1]
    cube = cube_direct(c)  # modes -3k_u..3k_u
    if 3 * k_u > p.k_max:
        raise DomainError(f"F(u*) needs k_max >= {3 * k_u}, problem has {p.k_max}")
    out = np.zeros(p.scale.size, dtype=complex)
    mid = p.k_max
    out[mid - 3 * k_u: mid + 3 * k_u + 1] += p.eps * cube
    lin = np.zeros(p.scale.size, dtype=complex)
    lin[mid - k_u: mid + k_u + 1] = c
    out += p.multiplier * lin
    return ScaleVector(p.scale, out)


def manufactured_solution(p: SyntheticLossProblem, modes: int = 8, amplitude: float = 3e-3,
                          decay: float = 6.0) -> ScaleVector:
    """Real, smooth ``u*`` with coefficients ``amplitude w(k)^{-decay}`` on ``|k| <= modes``."""
    if modes < 0 or 3 * modes > p.k_max:
        raise DomainError(f"modes must lie in [0, k_max/3], got {modes}")
    return p.scale.vector({k: amplitude * (1.0 + k * k) ** (-decay / 2) for k in range(-modes, modes + 1)})
