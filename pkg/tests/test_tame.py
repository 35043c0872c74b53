import numpy as np
import pytest

from tamesolve.errors import DomainError
from tamesolve.problems import SyntheticLossProblem
from tamesolve.scale import norm, random_vector
from tamesolve.tame import (
    derivative_consistency,
    left_inverse_defect,
    modulus_ladder,
    random_ball_vector,
    right_inverse_defect,
    verify_tame_direct,
    verify_tame_inverse,
)


@pytest.fixture(scope="module")
def problem():
    return SyntheticLossProblem(k_max=32)


def test_frozen_constants_cover_sweep(problem):
    # the constants were frozen from this exact sweep with a margin
    direct = verify_tame_direct(problem, 1000, np.random.default_rng(0), u_radius=0.05)
    inverse = verify_tame_inverse(problem, 1000, np.random.default_rng(0), u_radius=0.05)
    assert direct <= problem.a_direct
    assert inverse <= problem.b_inverse


def test_trials_must_be_positive(problem, rng):
    with pytest.raises(DomainError):
        verify_tame_direct(problem, 0, rng)


def test_ball_vector_radius(problem, rng):
    for _ in range(20):
        u = random_ball_vector(problem.scale, rng, 3.0, 0.2)
        assert 0 < norm(u, 3.0) < 0.2


def test_inverse_defects_vanish(problem, rng):
    u = random_ball_vector(problem.scale, rng, 3.0, 0.05, decay=4.0)
    k = random_vector(problem.scale, rng, decay=2.0)
    assert right_inverse_defect(problem, u, k) <= 1e-12
    assert left_inverse_defect(problem, u, k) <= 1e-12


def test_fd_consistency_on_quadratic():
    f = lambda x: x * x
    df = lambda x, h: 2 * x * h
    assert derivative_consistency(f, df, np.array([1.0, -2.0]), np.array([0.3, 0.1])) <= 1e-10


def test_modulus_ladder_halves(problem, rng):
    u1 = random_ball_vector(problem.scale, rng, 1.0, 1e-2, decay=4.0)
    h = random_ball_vector(problem.scale, rng, 1.0, 1e-1, decay=4.0)
    ratios = modulus_ladder(problem, u1, h, depth=6)
    # remainder/|d| = 3 eps u1 d^2/|d| + eps d^3/|d|: each halving divides it by 2 to 4
    for a, b in zip(ratios, ratios[1:]):
        assert a / 4 * (1 - 1e-9) <= b <= a / 2 * (1 + 1e-9)
