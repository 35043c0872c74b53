"""Command-line front end: ``tamesolve <command> [--config FILE] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scale as scale_mod
from .branch import circle_path, line_path, track_path, write_branch_csv
from .config import COMMANDS, load_config
from .errors import ConfigError, NonConvergenceError, TameSolveError
from .local import DescentConfig, solve_local, write_trace_csv
from .nash_moser import NashMoserConfig, run, uniqueness_suite, write_level_csv
from .problems import (
    ExampleA,
    NemytskiiProblem,
    SyntheticLossProblem,
    examplea_roots,
    manufactured_solution,
    manufactured_target,
)
from .scale import ScaleSpec, norm, random_vector, sweep_axioms
from .tame import verify_tame_direct, verify_tame_inverse


def _complex(pair) -> complex:
    return complex(float(pair[0]), float(pair[1]))


def _descent(cfg: dict) -> DescentConfig:
    return DescentConfig(**cfg["solver"])


def _examplea(cfg: dict) -> ExampleA:
    p = cfg["problem"]
    return ExampleA(n=p["n"], R=p["R"], m=p["m"], a=p["a"], dps=p["dps"])


def _nemytskii(cfg: dict) -> NemytskiiProblem:
    p = cfg["problem"]
    return NemytskiiProblem(grid_size=p["grid_size"], kind=p["phi"], coupling=p["coupling"],
                            R=p["radius"], m=p["m"], a=p["a"])


def _synthetic(cfg: dict) -> SyntheticLossProblem:
    p = cfg["problem"]
    return SyntheticLossProblem(k_max=p["k_max"], ell_prime=p["ell_prime"], eps=p["eps"],
                                neumann_terms=p["neumann_terms"])


def _require(cfg: dict, *kinds: str) -> str:
    kind = cfg["problem"]["kind"]
    if kind not in kinds:
        raise ConfigError(f"config field 'problem.kind' must be one of {kinds} for "
                          f"command {cfg['command']!r}, got {kind!r}")
    return kind


def _write(out: Path, name: str, writer) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="") as fh:
        writer(fh)
    return path


def cmd_solve(cfg: dict, out: Path) -> str:
    kind = _require(cfg, "examplea", "nemytskii")
    dcfg = _descent(cfg)
    if kind == "examplea":
        prob = _examplea(cfg)
        y = prob.point(_complex(cfg["solve"]["target"]))
    else:
        prob = _nemytskii(cfg)
        rng = np.random.default_rng(cfg["seed"])
        y = cfg["solve"]["amplitude"] * rng.uniform(-1.0, 1.0, prob.grid_size)
    res = solve_local(prob.local_problem(), y, dcfg)
    _write(out, "trace.csv", lambda fh: write_trace_csv(res, fh))
    if not res.converged:
        raise NonConvergenceError(f"solve ended with status {res.status}", res)
    if kind == "examplea":
        x = complex(res.x)
        gap = abs(res.x - prob.closed_inverse(y))
        return (f"status = {res.status}  x = {x.real:.12g}{x.imag:+.12g}j  "
                f"residual = {res.residual:.3e}  oracle_gap = {float(gap):.3e}")
    gap = float(np.max(np.abs(res.x - prob.exact_inverse(y))))
    return (f"status = {res.status}  sup_x = {float(np.max(np.abs(res.x))):.12g}  "
            f"residual = {res.residual:.3e}  oracle_gap = {gap:.3e}")


def cmd_branch(cfg: dict, out: Path) -> str:
    _require(cfg, "examplea")
    prob = _examplea(cfg)
    b = cfg["branch"]
    if b["shape"] == "line":
        path = line_path(prob.point(_complex(b["end"])), b["steps"])
    else:
        path = circle_path(b["radius"], b["samples"], lead_in=b["lead_in"])
    res = track_path(prob.local_problem(), path, _descent(cfg))
    _write(out, "branch.csv", lambda fh: write_branch_csv(res, fh))
    end = complex(res.endpoint)
    closure = "n/a" if res.closure_gap is None else f"{res.closure_gap:.3e}"
    return (f"endpoint = {end.real:.12g}{end.imag:+.12g}j  residual_max = {res.residual_max:.3e}  "
            f"closure_gap = {closure}  lipschitz_ok = {res.lipschitz_ok()}")


def cmd_census(cfg: dict, out: Path) -> str:
    _require(cfg, "examplea")
    n = cfg["problem"]["n"]
    Z = _complex(cfg["census"]["target"])
    radius = float(cfg["census"]["radius"])
    roots = sorted(examplea_roots(n, Z), key=lambda z: (round(abs(z), 12), np.angle(z)))
    tol = 1e-12 * max(1.0, radius)
    inside = [abs(z) <= radius + tol for z in roots]

    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "re", "im", "modulus", "in_disc"])
        for i, (z, flag) in enumerate(zip(roots, inside)):
            w.writerow([i, f"{z.real:.17g}", f"{z.imag:.17g}", f"{abs(z):.17g}", int(flag)])

    _write(out, "census.csv", writer)
    return f"roots_in_disc = {sum(inside)}"


def cmd_verify_tame(cfg: dict, out: Path) -> str:
    t = cfg["verify_tame"]
    rng = np.random.default_rng(cfg["seed"])
    spec = ScaleSpec(t["k_max"], t["s_max"])
    stats = sweep_axioms(spec, t["samples"], rng)
    rows = [("worst_loss_ratio", stats["worst_loss_ratio"]),
            ("worst_gain_ratio", stats["worst_gain_ratio"]),
            ("nesting_failures", stats["nesting_failures"])]
    if cfg["problem"]["kind"] == "synthetic":
        p = replace(_synthetic(cfg), k_max=t["k_max"])
        rows.append(("worst_direct_ratio", verify_tame_direct(p, t["trials"], rng, t["u_radius"])))
        rows.append(("worst_inverse_ratio", verify_tame_inverse(p, t["trials"], rng, t["u_radius"])))
        rows.append(("a_direct", p.a_direct))
        rows.append(("b_inverse", p.b_inverse))

    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in rows:
            w.writerow([k, f"{v:.17g}" if isinstance(v, float) else v])

    _write(out, "tame.csv", writer)
    return "  ".join(f"{k} = {v:.15g}" if isinstance(v, float) else f"{k} = {v}" for k, v in rows[:3])


def _nm_config(cfg: dict, **changes) -> NashMoserConfig:
    nm = cfg["nashmoser"]
    inner = DescentConfig(tol=nm["inner_tol"], atol=nm["inner_atol"], max_steps=nm["inner_max_steps"])
    base = NashMoserConfig(
        s0=nm["s0"], s1=nm["s1"], delta=nm["delta"], s_top=nm["s_top"], lam0=nm["lam0"],
        sigma=nm["sigma"], levels=nm["levels"], r=nm["r"], inner=inner,
        inner_radius=nm["inner_radius"], inner_a=nm["inner_a"], m_safety=nm["m_safety"],
        seed=cfg["seed"],
    )
    return replace(base, **changes)


def cmd_nashmoser(cfg: dict, out: Path) -> str:
    _require(cfg, "synthetic")
    p = _synthetic(cfg)
    nm = cfg["nashmoser"]
    u_star = None
    if nm["target_file"]:
        try:
            text = Path(nm["target_file"]).read_text()
        except OSError as exc:
            raise ConfigError(f"config field 'nashmoser.target_file': {exc}") from exc
        v = scale_mod.loads(text, p.scale)
    else:
        u_star = manufactured_solution(p, nm["modes"], nm["amplitude"], nm["decay"])
        v = manufactured_target(p, u_star)
    ncfg = _nm_config(cfg)
    res = run(p, v, ncfg)
    _write(out, "levels.csv", lambda fh: write_level_csv(res, fh))
    _write(out, "G.txt", lambda fh: fh.write(scale_mod.dumps(res.G)))
    if not res.converged:
        raise NonConvergenceError(res.failure or "Nash-Moser run failed")
    line = (f"levels = {len(res.states)}  G_norm_s1 = {res.G_norm_s1:.6e}  "
            f"max_identity_residual = {res.max_identity_residual():.3e}  bound_ok = {res.bound_ok()}")
    if u_star is not None:
        line += f"  error_s1 = {norm(res.G - u_star, ncfg.s1):.3e}"
    return line


def uniqueness_targets(p: SyntheticLossProblem, count: int, modes: int, max_norm: float,
                       delta: float, seed: int) -> list:
    """``count`` random targets on ``|k| <= modes`` with delta-norms ``max_norm j / count``."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(1, count + 1):
        c = random_vector(p.scale, rng, n_modes=modes, decay=4.0)
        out.append(c * (max_norm * j / count / norm(c, delta)))
    return out


def cmd_uniqueness(cfg: dict, out: Path) -> str:
    _require(cfg, "synthetic")
    p = _synthetic(cfg)
    u = cfg["uniqueness"]
    cfg_a = _nm_config(cfg)
    cfg_b = _nm_config(cfg, sigma=u["sigma_b"], levels=u["levels_b"])
    grid = uniqueness_targets(p, u["targets"], u["modes"], u["max_norm"], cfg_a.delta, cfg["seed"])
    rep = uniqueness_suite(p, grid, cfg_a, cfg_b)
    excluded = {i for i, _ in rep.excluded}

    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "v_norm_delta", "deviation_s1"])
        devs = iter(rep.deviations)
        for i, v in enumerate(grid):
            d = "excluded" if i in excluded else f"{next(devs):.17g}"
            w.writerow([i, f"{norm(v, cfg_a.delta):.17g}", d])

    _write(out, "uniqueness.csv", writer)
    return (f"max_deviation = {rep.max_deviation:.3e}  excluded = {len(rep.excluded)}  "
            f"left_defect = {rep.left_defect:.3e}")


HANDLERS = {
    "solve": cmd_solve,
    "branch": cmd_branch,
    "census": cmd_census,
    "verify-tame": cmd_verify_tame,
    "nashmoser": cmd_nashmoser,
    "uniqueness": cmd_uniqueness,
}


def run_command(cfg: dict) -> tuple[int, str]:
    """Execute a validated config; returns ``(exit_code, summary_or_error)``."""
    try:
        return 0, HANDLERS[cfg["command"]](cfg, Path(cfg["out"]))
    except TameSolveError as exc:
        return exc.exit_code, f"error: {exc}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tamesolve", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run config merged over the packaged defaults")
    ap.add_argument("--seed", type=int, help="seed for randomized inputs")
    ap.add_argument("--out", help="directory for CSV artifacts")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"command": args.command, "seed": args.seed, "out": args.out})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    code, message = run_command(cfg)
    print(message, file=sys.stdout if code == 0 else sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
