import io
from dataclasses import replace

import numpy as np
import pytest

from tamesolve.errors import DomainError, InadmissibleError, OutOfRadiusError
from tamesolve.nash_moser import (
    NashMoserConfig,
    continuity_constant,
    defect_e,
    delta_v,
    fit_geometric_ratio,
    inner_solve,
    run,
    uniqueness_suite,
    write_level_csv,
)
from tamesolve.problems import SyntheticLossProblem, manufactured_solution, manufactured_target
from tamesolve.scale import norm, project, random_vector


@pytest.fixture(scope="module")
def problem():
    return SyntheticLossProblem(k_max=1024)


@pytest.fixture(scope="module")
def small():
    return SyntheticLossProblem(k_max=64)


def small_cfg(**kw):
    return NashMoserConfig(levels=6, **kw)  # lam_6 = 64 fits k_max = 64


def test_annuli_partition_and_telescope(small, rng):
    cfg = small_cfg()
    v = random_vector(small.scale, rng)
    total = small.zero()
    for n in range(1, cfg.levels + 1):
        total = total + delta_v(v, n, cfg)
    assert total == project(v, cfg.cutoff(cfg.levels - 1))


def test_single_mode_lands_in_one_annulus(small):
    cfg = small_cfg()
    v = small.scale.vector({5: 1.0})  # w(5) ~ 5.1 lies in (lam_2, lam_3] = (4, 8]
    hits = [n for n in range(1, 8) if not delta_v(v, n, cfg).is_zero()]
    assert hits == [4]


def test_level_index_must_be_positive(small):
    with pytest.raises(DomainError):
        delta_v(small.zero(), 0, small_cfg())
    with pytest.raises(DomainError):
        defect_e(small, small.zero(), 0, small_cfg())


def test_defect_vanishes_at_origin_and_first_level(small, rng):
    cfg = small_cfg()
    assert defect_e(small, small.zero(), 3, cfg).is_zero()
    u = project(random_vector(small.scale, rng, decay=3.0), 2.0) * 1e-3
    assert defect_e(small, u, 1, cfg).is_zero()


def test_defect_linear_case_is_zero(rng):
    # a diagonal F resolved exactly at level n-1 leaves no window residual
    p = SyntheticLossProblem(k_max=64, eps=0.0)
    cfg = small_cfg()
    u = project(random_vector(p.scale, rng), cfg.cutoff(2))
    assert norm(defect_e(p, u, 3, cfg), 1.0) == 0.0


def test_inner_solve_zero_rhs(small):
    z, res = inner_solve(small, small.zero(), small.zero(), 2, small_cfg())
    assert z.is_zero() and res is None


def test_inner_solve_linear_one_step(rng):
    p = SyntheticLossProblem(k_max=64, eps=0.0)
    cfg = small_cfg()
    rhs = project(random_vector(p.scale, rng, decay=4.0), cfg.cutoff(2)) * 1e-3
    z, _ = inner_solve(p, p.zero(), rhs, 2, cfg)
    assert norm(z - p.base_inverse(rhs), 1.0) <= 1e-13


def test_run_zero_target(small):
    res = run(small, small.zero(), small_cfg())
    assert res.converged and res.G.is_zero()
    assert all(s.inner_steps == 0 for s in res.states)


def test_run_linear_case(rng):
    p = SyntheticLossProblem(k_max=64, eps=0.0)
    v = project(random_vector(p.scale, rng, decay=8.0), 4.0)
    v = v * (1e-3 / norm(v, 6.0))
    res = run(p, v, small_cfg())
    assert norm(res.G - p.base_inverse(v), 3.0) <= 1e-12


def test_run_rejects_large_target(small, rng):
    v = random_vector(small.scale, rng)
    with pytest.raises(OutOfRadiusError):
        run(small, v * (1.0 / norm(v, 6.0)), small_cfg())


def test_manufactured_level_three_inner_residual(problem):
    u_star = manufactured_solution(problem)
    res = run(problem, manufactured_target(problem, u_star), NashMoserConfig())
    level3 = res.states[2]
    assert level3.inner.residual <= 1e-11
    assert all(np.all(project(s.u, s.cutoff).coeffs == s.u.coeffs) for s in res.states)
    assert res.bound_ok()


def test_level_failure_returns_partial_trace(problem):
    u_star = manufactured_solution(problem, amplitude=8e-3)
    v = manufactured_target(problem, u_star)
    res = run(problem, v, NashMoserConfig(r=1.0))
    assert not res.converged
    assert "level" in res.failure
    assert 0 < len(res.states) < 10


@pytest.mark.parametrize("changes", [
    dict(lam0=0.5), dict(sigma=1.0), dict(s1=2.0), dict(delta=4.0),
    dict(levels=11), dict(s_top=8.0), dict(r=0.0),
])
def test_config_validation(problem, changes):
    with pytest.raises(DomainError):
        replace(NashMoserConfig(), **changes).validate(problem)


def test_fit_ratio():
    assert fit_geometric_ratio([8.0, 4.0, 2.0, 1.0, 0.0]) == pytest.approx(0.5)
    assert np.isnan(fit_geometric_ratio([1.0, 0.0]))


def test_uniqueness_linear_case(rng):
    p = SyntheticLossProblem(k_max=729, eps=0.0)
    v = project(random_vector(p.scale, rng, decay=8.0), 8.0)
    grid = [p.zero(), v * (1e-3 / norm(v, 6.0))]
    rep = uniqueness_suite(p, grid, NashMoserConfig(levels=9), NashMoserConfig(sigma=3.0, levels=6))
    assert rep.max_deviation <= 1e-12
    assert rep.deviations[0] == 0.0


def test_uniqueness_excludes_out_of_radius(small, rng):
    v = random_vector(small.scale, rng)
    rep = uniqueness_suite(small, [v * (1.0 / norm(v, 6.0))], small_cfg(), small_cfg(sigma=2.0))
    assert len(rep.excluded) == 1 and rep.deviations == []


def test_continuity_constant_stable_under_refinement(rng):
    consts = []
    for k_max in (256, 1024):
        p = SyntheticLossProblem(k_max=k_max)
        cfg = NashMoserConfig(levels=8 if k_max == 256 else 10)
        u_star = manufactured_solution(p, amplitude=2e-3)
        v = manufactured_target(p, u_star)
        d = p.scale.vector({k: 1.0 / (1 + k * k) ** 3 for k in range(-4, 5)})
        consts.append(continuity_constant(p, v, cfg, [d, d * 1j]))
    assert consts[0] == pytest.approx(consts[1], rel=1e-6)
    assert consts[1] < 1 / NashMoserConfig().r


def test_level_csv(problem):
    res = run(problem, manufactured_target(problem, manufactured_solution(problem)), NashMoserConfig())
    buf = io.StringIO()
    write_level_csv(res, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,cutoff,z_norm_s1,e_norm_s0,identity_residual,G_norm_s1"
    assert len(lines) == 11
