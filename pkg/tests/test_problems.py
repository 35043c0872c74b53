import cmath
import math

import mpmath
import numpy as np
import pytest

from tamesolve.errors import DomainError, InadmissibleError
from tamesolve.local import solve_local
from tamesolve.problems import (
    ExampleA,
    NemytskiiProblem,
    SyntheticLossProblem,
    cube_direct,
    examplea_closed_inverse,
    examplea_f,
    examplea_roots,
    manufactured_solution,
    manufactured_target,
    polynomial_roots,
    root_census,
)
from tamesolve.scale import norm, random_vector


# ---- polynomial example -----------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 8, 64])
def test_stable_evaluation_matches_high_precision(n):
    z = 0.3 - 0.2j
    with mpmath.workdps(60):
        ref = complex((2 + mpmath.mpc(z)) ** n - mpmath.mpf(2) ** n)
    assert abs(examplea_f(n, z) - ref) <= 1e-14 * abs(ref)


def test_closed_inverse_round_trip():
    for n in (2, 5, 16):
        for Z in (0.5, -0.3j, 1 + 1j):
            z = examplea_closed_inverse(n, Z)
            assert abs(examplea_f(n, z) - Z) <= 1e-12 * max(1, abs(Z))


def test_closed_inverse_rejects_branch_cut():
    with pytest.raises(DomainError):
        examplea_closed_inverse(2, -4.0)


def test_n2_z1_golden():
    assert examplea_closed_inverse(2, 1.0) == pytest.approx(math.sqrt(5) - 2, abs=1e-15)


def test_high_precision_mode_near_nonprincipal_root():
    prob = ExampleA(64, dps=40)
    roots = sorted(examplea_roots(64, 13j), key=abs)
    z1 = roots[1]
    res = solve_local(prob.local_problem(), prob.point(13j), x0=prob.point(z1), check_radius=False)
    assert res.converged
    assert abs(complex(res.x) - z1) <= 1e-10


def test_polynomial_roots_quadratic():
    r = sorted(polynomial_roots([1, -3, 2]).real)
    assert r == pytest.approx([1.0, 2.0])


@pytest.mark.parametrize("n,Z,radius,expected", [
    (64, 13j, 13 / 64, 3),
    (2, 1.0, 0.5, 1),
    (1, 0.3, 0.5, 1),
    (8, 0.0, 0.1, 1),
])
def test_root_census(n, Z, radius, expected):
    assert root_census(n, Z, radius) == expected


def test_census_invalid_radius():
    with pytest.raises(DomainError):
        root_census(4, 1.0, 0.0)


def test_examplea_bad_parameters():
    with pytest.raises(DomainError):
        ExampleA(0)
    with pytest.raises(DomainError):
        ExampleA(4, R=1.5)


# ---- superposition operator -------------------------------------------------

@pytest.mark.parametrize("kind", ["sine", "arctan"])
def test_nemytskii_round_trip(kind, rng):
    p = NemytskiiProblem(grid_size=256, kind=kind)
    u = rng.uniform(-3, 3, 256)
    np.testing.assert_allclose(p.exact_inverse(p.apply(u)), u, atol=1e-12)
    v = rng.uniform(-3, 3, 256)
    np.testing.assert_allclose(p.apply(p.exact_inverse(v)), v, atol=1e-12)


def test_nemytskii_admissibility_bounds():
    p = NemytskiiProblem()
    assert p.inf_phi_prime == pytest.approx(0.55)
    assert p.sup_phi_prime == pytest.approx(1.45)
    with pytest.raises(DomainError):
        NemytskiiProblem(coupling=1.0)
    with pytest.raises(DomainError):
        NemytskiiProblem(kind="cosh")


def test_nemytskii_shape_check():
    with pytest.raises(DomainError):
        NemytskiiProblem(grid_size=8).apply(np.zeros(9))


# ---- synthetic loss-of-derivatives problem ----------------------------------

def test_cube_direct_matches_polynomial_product(rng):
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    p = np.polynomial.polynomial.polymul(np.polymul(c, c), c)
    np.testing.assert_allclose(cube_direct(c), p, atol=1e-12)


def test_pseudospectral_cube_equals_convolution(rng):
    p = SyntheticLossProblem(k_max=30)
    u = random_vector(p.scale, rng, n_modes=21, decay=0.0)
    # restrict u to |k| <= 10 so that the cube fits the truncation
    u = p.scale.vector({int(k): u[int(k)] for k in range(-10, 11)})
    assert norm(p.F(u) - manufactured_target(p, u), 0.0) <= 1e-12 * norm(p.F(u), 0.0)


def test_linear_case_inverse_exact(rng):
    p = SyntheticLossProblem(k_max=16, eps=0.0)
    k = random_vector(p.scale, rng)
    assert norm(p.DF(p.zero(), p.L(p.zero(), k)) - k, 1.0) <= 1e-13 * norm(k, 1.0)


def test_right_inverse_defect_small_ball(rng):
    p = SyntheticLossProblem(k_max=32)
    u = random_vector(p.scale, rng, decay=3.0)
    u = u * (0.05 / norm(u, 3.0))
    k = random_vector(p.scale, rng, decay=2.0)
    assert norm(p.DF(u, p.L(u, k)) - k, 1.0) <= 1e-12 * norm(k, 1.0)


def test_inadmissible_amplitude_detected():
    p = SyntheticLossProblem(k_max=1024)
    big = manufactured_solution(p, amplitude=0.1)
    with pytest.raises(InadmissibleError):
        p.check_admissible(big)
    assert p.check_admissible(manufactured_solution(p)) < 0.9


def test_manufactured_target_support_check():
    p = SyntheticLossProblem(k_max=20)
    with pytest.raises(DomainError):
        manufactured_solution(p, modes=8)


def test_lift_embeds_coarse_vector(rng):
    coarse = SyntheticLossProblem(k_max=8)
    fine = SyntheticLossProblem(k_max=32)
    u = random_vector(coarse.scale, rng)
    lifted = fine.lift(u)
    assert lifted[8] == u[8] and lifted[-8] == u[-8]
    assert norm(lifted, 2.0) == pytest.approx(norm(u, 2.0))
    assert coarse.lift(lifted) == u


@pytest.mark.parametrize("n,Z", [(3, 1 + 1j), (16, -5.0), (64, 13j), (100, 0.25)])
def test_roots_match_closed_form(n, Z):
    with mpmath.workdps(50):
        base = mpmath.root(mpmath.mpf(2) ** n + mpmath.mpc(Z), n)
        exact = [complex(base * mpmath.expjpi(mpmath.mpf(2 * j) / n) - 2) for j in range(n)]
    got = examplea_roots(n, Z)
    for z in exact:
        assert np.min(np.abs(got - z)) <= 1e-12
