"""Discrete Sobolev scale on periodic Fourier modes.

Elements are finite Fourier series ``u = sum_k c_k e^{ikx}`` with ``|k| <= k_max``.
The graded norm is

    ||u||_s = ( sum_k w(k)^{2s} |c_k|^2 )^{1/2},   w(k) = (1 + k^2)^{1/2},

and the smoothing projector ``project(u, lam)`` keeps the modes with ``w(k) <= lam``.
For this sharp cutoff both smoothing constants are exactly one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import DomainError

__all__ = [
    "ScaleSpec",
    "ScaleVector",
    "ProjectorFamily",
    "norm",
    "project",
    "verify_loss",
    "verify_gain",
    "random_vector",
    "sweep_axioms",
    "dumps",
    "loads",
]


@dataclass(frozen=True)
class ScaleSpec:
    """Truncation ``|k| <= k_max`` and grading range ``[0, s_max]``."""

    k_max: int
    s_max: float

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise DomainError(f"k_max must be an integer >= 1, got {self.k_max}")
        if not self.s_max > 0:
            raise DomainError(f"s_max must be positive, got {self.s_max}")

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.sqrt(1.0 + self.modes.astype(float) ** 2)

    @property
    def size(self) -> int:
        return 2 * self.k_max + 1

    def weight(self, k) -> float:
        return float(np.sqrt(1.0 + float(k) ** 2))

    def index(self, k: int) -> int:
        if abs(k) > self.k_max:
            raise DomainError(f"mode {k} outside |k| <= {self.k_max}")
        return int(k) + self.k_max

    def check_grading(self, s: float) -> None:
        if not 0.0 <= s <= self.s_max:
            raise DomainError(f"grading s={s} outside [0, {self.s_max}]")

    def zeros(self) -> "ScaleVector":
        return ScaleVector(self, np.zeros(self.size, dtype=complex))

    def vector(self, coefficients: Mapping[int, complex]) -> "ScaleVector":
        c = np.zeros(self.size, dtype=complex)
        for k, value in coefficients.items():
            c[self.index(k)] = value
        return ScaleVector(self, c)

    def cutoff_mask(self, lam: float) -> np.ndarray:
        if not lam >= 1.0:
            raise DomainError(f"cutoff must satisfy lam >= 1, got {lam}")
        return 1.0 + self.modes.astype(float) ** 2 <= lam * lam


class ScaleVector:
    """Fourier coefficients of one element of the scale.

    Supports the vector-space operations the solvers need (``+``, ``-``,
    scalar multiplication); everything else goes through module functions.
    """

    __slots__ = ("spec", "coeffs")
    __array_priority__ = 100

    def __init__(self, spec: ScaleSpec, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (spec.size,):
            raise DomainError(
                f"expected {spec.size} coefficients for k_max={spec.k_max}, got shape {coeffs.shape}"
            )
        self.spec = spec
        self.coeffs = coeffs

    def _check(self, other):
        if not isinstance(other, ScaleVector):
            return NotImplemented
        if other.spec != self.spec:
            raise DomainError("scale vectors live on different scales")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return ScaleVector(self.spec, self.coeffs + other.coeffs)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return ScaleVector(self.spec, self.coeffs - other.coeffs)

    def __neg__(self):
        return ScaleVector(self.spec, -self.coeffs)

    def __mul__(self, alpha):
        if isinstance(alpha, ScaleVector):
            return NotImplemented
        return ScaleVector(self.spec, self.coeffs * complex(alpha))

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return ScaleVector(self.spec, self.coeffs / complex(alpha))

    def __eq__(self, other):
        if not isinstance(other, ScaleVector):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def __repr__(self):
        nz = np.flatnonzero(self.coeffs)
        head = ", ".join(f"{self.spec.modes[i]}: {self.coeffs[i]:.3g}" for i in nz[:4])
        more = ", ..." if nz.size > 4 else ""
        return f"ScaleVector(k_max={self.spec.k_max}, {{{head}{more}}})"

    def __getitem__(self, k: int) -> complex:
        return complex(self.coeffs[self.spec.index(k)])

    def copy(self) -> "ScaleVector":
        return ScaleVector(self.spec, self.coeffs.copy())

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def support(self) -> np.ndarray:
        """Modes carrying a nonzero coefficient."""
        return self.spec.modes[np.flatnonzero(self.coeffs)]

    def norm(self, s: float) -> float:
        return norm(self, s)

    def project(self, lam: float) -> "ScaleVector":
        return project(self, lam)


def norm(u: ScaleVector, s: float) -> float:
    u.spec.check_grading(s)
    w = u.spec.weights ** s
    return float(np.sqrt(np.sum((w * np.abs(u.coeffs)) ** 2)))


def project(u: ScaleVector, lam: float) -> ScaleVector:
    mask = u.spec.cutoff_mask(lam)
    return ScaleVector(u.spec, np.where(mask, u.coeffs, 0.0))


def complement(u: ScaleVector, lam: float) -> ScaleVector:
    """``(1 - project(., lam)) u``."""
    mask = u.spec.cutoff_mask(lam)
    return ScaleVector(u.spec, np.where(mask, 0.0, u.coeffs))


@dataclass(frozen=True)
class ProjectorFamily:
    """Sharp spectral cutoffs ``Pi(lam)`` with their smoothing constants."""

    spec: ScaleSpec
    A1: float = 1.0
    A2: float = 1.0
    name: str = field(default="sharp", compare=False)

    def __call__(self, u: ScaleVector, lam: float) -> ScaleVector:
        return project(u, lam)

    def complement(self, u: ScaleVector, lam: float) -> ScaleVector:
        return complement(u, lam)

    def kept_modes(self, lam: float) -> np.ndarray:
        return self.spec.modes[self.spec.cutoff_mask(lam)]

    def max_cutoff(self) -> float:
        """Smallest cutoff at which the projector is the identity."""
        return self.spec.weight(self.spec.k_max)


def verify_loss(u: ScaleVector, s: float, t: float, lam: float) -> float:
    """Ratio ``||Pi(lam) u||_t / (lam^{(t-s)+} ||u||_s)``; the growth estimate holds iff it is <= A1."""
    u.spec.check_grading(s)
    u.spec.check_grading(t)
    denom = lam ** max(t - s, 0.0) * norm(u, s)
    if denom == 0.0:
        raise DomainError("loss ratio undefined for u = 0")
    return norm(project(u, lam), t) / denom


def verify_gain(u: ScaleVector, s: float, t: float, lam: float) -> float:
    """Ratio ``||(1 - Pi(lam)) u||_t / (lam^{-(s-t)} ||u||_s)``; the approximation estimate holds iff it is <= A2."""
    if t > s:
        raise DomainError(f"gain estimate needs t <= s, got t={t}, s={s}")
    u.spec.check_grading(s)
    u.spec.check_grading(t)
    denom = lam ** (-(s - t)) * norm(u, s)
    if denom == 0.0:
        raise DomainError("gain ratio undefined for u = 0")
    return norm(complement(u, lam), t) / denom


def random_vector(spec: ScaleSpec, rng: np.random.Generator, n_modes: int | None = None,
                  decay: float = 0.0) -> ScaleVector:
    """Random complex vector on ``n_modes`` distinct modes, amplitudes ~ w(k)^-decay."""
    n_modes = spec.size if n_modes is None else min(n_modes, spec.size)
    idx = rng.choice(spec.size, size=n_modes, replace=False)
    c = np.zeros(spec.size, dtype=complex)
    c[idx] = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    c[idx] *= spec.weights[idx] ** (-decay)
    return ScaleVector(spec, c)


def sweep_axioms(spec: ScaleSpec, samples: int, rng: np.random.Generator,
                 n_modes: int = 128, nesting_samples: int = 1000) -> dict:
    """Randomized check of the growth/approximation estimates and projector nesting.

    Returns the worst loss ratio, worst gain ratio and the number of nesting
    identity failures (exact equality is required).
    """
    lam_hi = np.log(1.5 * spec.weight(spec.k_max))
    worst_loss = worst_gain = 0.0
    for _ in range(samples):
        u = random_vector(spec, rng, n_modes, decay=rng.uniform(0.0, 2.0))
        s, t = rng.uniform(0.0, spec.s_max, size=2)
        lam = float(np.exp(rng.uniform(0.0, lam_hi)))
        worst_loss = max(worst_loss, verify_loss(u, s, t, lam))
        hi, lo = max(s, t), min(s, t)
        worst_gain = max(worst_gain, verify_gain(u, hi, lo, lam))
    nesting_failures = 0
    for _ in range(nesting_samples):
        u = random_vector(spec, rng, n_modes)
        l1, l2 = sorted(np.exp(rng.uniform(0.0, lam_hi, size=2)))
        target = project(u, l1)
        if not (project(project(u, l2), l1) == target and project(project(u, l1), l2) == target):
            nesting_failures += 1
    return {
        "samples": samples,
        "worst_loss_ratio": worst_loss,
        "worst_gain_ratio": worst_gain,
        "nesting_samples": nesting_samples,
        "nesting_failures": nesting_failures,
    }


def dumps(u: ScaleVector) -> str:
    """Serialize as ``k re im`` lines for the nonzero modes, ascending in k."""
    lines = []
    for i in np.flatnonzero(u.coeffs):
        c = u.coeffs[i]
        lines.append(f"{int(u.spec.modes[i])} {float(c.real)!r} {float(c.imag)!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def loads(text: str, spec: ScaleSpec) -> ScaleVector:
    coefficients: dict[int, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DomainError(f"line {lineno}: expected 'k re im', got {raw!r}")
        try:
            k = int(parts[0])
            value = complex(float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise DomainError(f"line {lineno}: {exc}") from None
        if k in coefficients:
            raise DomainError(f"line {lineno}: duplicate mode {k}")
        coefficients[k] = value
    return spec.vector(coefficients)
