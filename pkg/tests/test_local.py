import io
import math

import numpy as np
import pytest

from tamesolve.errors import DomainError, NeumannDivergenceError, OutOfRadiusError, RadiusBreach
from tamesolve.local import (
    DescentConfig,
    LocalProblem,
    certify_assumptions,
    descent_step,
    neumann_right_inverse,
    neumann_series,
    residual_decay_check,
    solve_local,
    write_trace_csv,
)
from tamesolve.problems import ExampleA


def linear_problem(scale=2.0, **kw):
    """f(x) = scale * x on R^3, exact right-inverse."""
    base = dict(
        f=lambda x: scale * x,
        df=lambda x, h: scale * h,
        right_inverse=lambda x, k: k / scale,
        origin=np.zeros(3),
        R=1.0,
        m=0.6,
        a=0.1,
        l_sup=1 / scale,
    )
    base.update(kw)
    return LocalProblem(**base)


def test_derived_radii():
    p = linear_problem()
    assert p.target_radius == pytest.approx(0.9 / 0.6)
    assert p.selection_bound == pytest.approx(0.6 / 0.9)
    assert p.warm_radius(np.array([0.5, 0, 0])) == pytest.approx(0.9 * 0.5 / 0.6)


@pytest.mark.parametrize("field,value", [("R", 0.0), ("m", -1.0), ("a", 1.0), ("a", -0.1)])
def test_invalid_problem_parameters(field, value):
    with pytest.raises(DomainError):
        linear_problem(**{field: value})


def test_zero_target_returns_origin_without_steps():
    res = solve_local(linear_problem(), np.zeros(3))
    assert res.converged and res.steps == 0
    assert np.all(res.x == 0)


def test_linear_problem_solved_exactly():
    y = np.array([0.3, -0.2, 0.1])
    res = solve_local(linear_problem(), y)
    assert res.converged
    np.testing.assert_allclose(res.x, y / 2, atol=1e-13)


def test_out_of_radius_is_rejected():
    with pytest.raises(OutOfRadiusError):
        solve_local(linear_problem(), np.array([2.0, 0, 0]))


def test_examplea_n2_golden_value():
    res = solve_local(ExampleA(2).local_problem(), 1.0)
    assert res.converged and res.bound_ok
    assert abs(res.x - (math.sqrt(5) - 2)) <= 1e-12


def test_max_steps_status():
    cfg = DescentConfig(max_steps=1, line_search=False, step=0.01)
    res = solve_local(ExampleA(2).local_problem(), 1.0, cfg)
    assert not res.converged and res.status == "max_steps"


def test_decay_contract_on_trace():
    res = solve_local(ExampleA(8).local_problem(), 3.0 + 1.0j)
    assert residual_decay_check(res)
    # residuals are non-increasing along accepted steps
    assert all(b <= a for a, b in zip(res.residuals, res.residuals[1:]))


def test_resolve_defaults():
    p = ExampleA(4).local_problem()
    cfg = DescentConfig().resolve(p)
    assert cfg.a_prime == pytest.approx((1 + p.a) / 2)
    m0 = (p.l_sup + p.m) / 2
    assert cfg.tau == pytest.approx((p.m - m0) / ((1 - cfg.a_prime) * m0))
    assert cfg.step <= cfg.tau


def test_a_prime_must_exceed_a():
    with pytest.raises(DomainError):
        DescentConfig(a_prime=0.1).resolve(ExampleA(4).local_problem())


def test_descent_step_leaving_ball():
    p = linear_problem(R=0.1)
    with pytest.raises(RadiusBreach):
        descent_step(p, np.zeros(3), np.array([1.0, 0, 0]), 1.0)


def test_neumann_inverts_perturbed_diagonal():
    rng = np.random.default_rng(0)
    A = np.diag([2.0, 3.0, 4.0]) + 0.1 * rng.standard_normal((3, 3))
    k = rng.standard_normal(3)
    x = neumann_series(lambda h: A @ h, lambda r: r / np.diag(A), k, 60, norm=np.linalg.norm)
    np.testing.assert_allclose(A @ x, k, atol=1e-12)


def test_neumann_divergence_detected():
    A = np.array([[1.0, 5.0], [5.0, 1.0]])
    with pytest.raises(NeumannDivergenceError):
        neumann_series(lambda h: A @ h, lambda r: r, np.array([1.0, 0.3]), 40, norm=np.linalg.norm)


def test_neumann_right_inverse_on_examplea():
    p = ExampleA(3).local_problem()
    z = 0.3 + 0.1j
    h = neumann_right_inverse(p, z, 1.0, 3)
    assert abs(p.df(z, h) - 1.0) <= 1e-14


def test_certify_assumptions_examplea(rng):
    p = ExampleA(8).local_problem()
    rep = certify_assumptions(p, rng, samples=200)
    assert rep.holds(p)
    assert rep.l_sup <= p.l_sup * (1 + 1e-12)


def test_trace_csv_columns():
    res = solve_local(ExampleA(2).local_problem(), 0.5)
    buf = io.StringIO()
    write_trace_csv(res, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,flow_time,residual,x_norm"
    assert len(lines) == res.steps + 2
