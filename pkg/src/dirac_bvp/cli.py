"""Command-line front end: ``python -m dirac_bvp <subcommand> <config>``.

Exit codes: 0 success, 2 configuration error, 3 numerical contract
violated, 4 window violation during the split evolution.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import AUTO, ConfigError, RunConfig, load_config, write_snapshot
from .evolution import (EvolutionConfig, EvolutionConfigError, InstabilityError, SplitSolver,
                        WindowViolation, evolve_cauchy, export_trace, max_speed, reference_evolve)
from .geometry import (GeometryError, InfeasibleMixError, MetricClosure, ef_charged_3d,
                       ef_schwarzschild, find_timelike_mix, flat_polar, flat_spherical,
                       horizon_radii, kerr_ef)
from .hamiltonian import (Grid, assemble_hamiltonian, boundary_projector, compatibility_residuals,
                          locate_horizons, make_bump_data, principal_symbol, radial_grid,
                          scalar_potential, zero_potential)
from .spectral import SpectralError, build_region_X, eigendecompose_X, export_spectrum
from .spinor import build_vielbein, curved_gammas, flat_clifford_rep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_WINDOW = 0, 2, 3, 4


@dataclass
class Problem:
    cfg: RunConfig
    closure: MetricClosure
    grid: Grid
    B: Callable
    m: float


def build_closure(cfg: RunConfig) -> MetricClosure:
    mc = cfg.metric
    if mc.kind == "flat":
        return flat_polar(mc.r0) if mc.d == 3 else flat_spherical(mc.r0)
    if mc.kind == "ef_schwarzschild":
        return ef_schwarzschild(mc.M, mc.r0)
    if mc.kind == "ef_charged_3d":
        return ef_charged_3d(mc.M, mc.Q, mc.r0)
    b = mc.b
    if b == AUTO:
        try:
            b = find_timelike_mix(mc.M, mc.a, mc.r0)
        except InfeasibleMixError as exc:
            print(f"note: {exc}; using b = 0", file=sys.stderr)
            b = 0.0
    return kerr_ef(mc.M, mc.a, float(b), mc.r0)


def build_problem(cfg: RunConfig) -> Problem:
    closure = build_closure(cfg)
    f = 2 if closure.d == 3 else 4
    B = zero_potential(f) if cfg.operator.potential == "zero" else scalar_potential(cfg.operator.V, f)
    g = cfg.grid
    grid = radial_grid(closure, cfg.metric.r0, g.r_outer, g.Nr, k=g.k,
                       n_theta=g.Ntheta if closure.polar is not None else None,
                       order=cfg.operator.order)
    return Problem(cfg=cfg, closure=closure, grid=grid, B=B, m=cfg.operator.m)


def bump_for(problem: Problem) -> np.ndarray:
    cfg, grid = problem.cfg, problem.grid
    ev = cfg.evolution
    r_max = cfg.r_max
    center = cfg.metric.r0 + 0.3 * r_max if ev.bump_center == AUTO else ev.bump_center
    radius = 0.15 * r_max if ev.bump_radius == AUTO else ev.bump_radius
    f = 2 if problem.closure.d == 3 else 4
    profile = [1.0, 0.5j, 0.3, -0.2][:f]
    if problem.closure.polar is not None:
        return make_bump_data(grid, [center, math.pi / 2], [radius, 0.8], profile,
                              p_max=cfg.spectral.p_max)
    return make_bump_data(grid, [center], [radius], profile, p_max=cfg.spectral.p_max)


def _evolution_config(problem: Problem) -> EvolutionConfig:
    cfg = problem.cfg
    ev, tol = cfg.evolution, cfg.tolerances
    dt = ev.dt
    if dt == AUTO:
        dt = 0.5 * ev.CFL * problem.grid.radial.h / max_speed(problem.closure, problem.grid.points())
    return EvolutionConfig(T_final=ev.T_final, dt=float(dt), r_max=cfg.r_max, scheme=ev.scheme,
                           cfl=ev.CFL, threshold=tol.support_threshold, window_tol=tol.window,
                           norm_tol=tol.norm, series_phases=ev.series_phases,
                           window_fraction=ev.window_fraction)


def _out_dir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output.directory, exist_ok=True)
    return cfg.output.directory


# --------------------------------------------------------------------------
# subcommands


def cmd_horizons(problem: Problem, args) -> int:
    cfg, closure = problem.cfg, problem.closure
    mc = cfg.metric
    exact = []
    if mc.kind in ("kerr_ef", "ef_schwarzschild"):
        exact = list(horizon_radii(mc.M, mc.a if mc.kind == "kerr_ef" else 0.0))
    elif mc.kind == "ef_charged_3d":
        root = math.sqrt(mc.M ** 2 - mc.Q ** 2)
        exact = [mc.M - root, mc.M + root]
    scale = mc.M if mc.kind != "flat" else 1.0
    hi = max(cfg.grid.r_outer, 4.0 * scale)
    found = locate_horizons(closure, (1e-3 * scale, hi), tol=1e-12, n_scan=args.n_scan)
    print("source,index,r")
    for i, r in enumerate(exact):
        print(f"closed_form,{i},{r!r}")
    for i, r in enumerate(found):
        print(f"scan,{i},{r!r}")
    return EXIT_OK


def _parse_pair(text, name):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma separated numbers, got {text!r}") from None


def cmd_symbol(problem: Problem, args) -> int:
    closure = problem.closure
    at = _parse_pair(args.at, "at")
    xi = _parse_pair(args.xi, "xi")
    if len(xi) != closure.d - 1:
        raise ConfigError(f"--xi needs {closure.d - 1} components")
    x = np.zeros(closure.d)
    x[1] = at[0]
    if closure.polar is not None:
        if len(at) < 2:
            raise ConfigError("--at needs r,theta for this metric")
        x[closure.polar] = at[1]
    s = principal_symbol(closure, None, x, xi)
    print("row,col,re,im")
    for i in range(s.P.shape[0]):
        for j in range(s.P.shape[1]):
            print(f"{i},{j},{float(s.P[i, j].real)!r},{float(s.P[i, j].imag)!r}")
    rel = abs(s.detP - s.det_formula) / max(1.0, abs(s.detP))
    print(f"# det_direct = {s.detP.real!r}{s.detP.imag:+.3e}j")
    print(f"# det_formula = {s.det_formula!r}")
    print(f"# relative_difference = {rel:.3e}")
    return EXIT_OK if rel <= 1e-10 else EXIT_NUMERIC


def cmd_spectrum(problem: Problem, args) -> int:
    cfg = problem.cfg
    region = build_region_X(problem.closure, problem.grid, cfg.r_mid, B=problem.B, m=problem.m)
    herm = region.H.hermiticity()
    basis = eigendecompose_X(region.H.H, region.H.w, tol=cfg.tolerances.hermiticity)
    path = os.path.join(_out_dir(cfg), "spectrum.csv")
    export_spectrum(basis, region.H, path)
    print(f"region X: r in [{region.r0}, {region.r_mid}], dimension {region.H.dim}")
    print(f"hermiticity_residual = {herm:.3e}")
    print(f"orthonormality_error = {basis.orthonormality_error():.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_evolve(problem: Problem, args) -> int:
    cfg = problem.cfg
    econf = _evolution_config(problem)
    solver = SplitSolver.build(problem.closure, problem.grid, econf, B=problem.B, m=problem.m)
    psi0 = bump_for(problem)
    out = _out_dir(cfg)
    g = problem.grid
    n_th = g.shape[1] if len(g.axes) > 1 else 1
    traces = {}
    if not args.reference_only:
        traces["split"] = evolve_cauchy(solver, psi0)
    if args.reference or args.reference_only:
        traces["reference"] = reference_evolve(solver, psi0)
    for name, trace in traces.items():
        export_trace(trace, os.path.join(out, f"{name}_trace.csv"))
        for i in range(0, len(trace.times), cfg.output.snapshot_every):
            write_snapshot(os.path.join(out, f"{name}_{i:05d}.dirh"), trace.snapshots[i],
                           problem.closure.d, solver.f, g.shape[0], n_th, g.k)
        drift = abs(trace.w_norm[-1] - trace.w_norm[0])
        print(f"{name}: t_final={trace.times[-1]:.6g} windows={len(trace.times) - 1} "
              f"norm_drift={drift:.3e} max_boundary_residual={max(trace.boundary_residual):.3e}")
    if len(traces) == 2:
        diff = solver.reference.full_norm(traces["split"].snapshots[-1] - traces["reference"].snapshots[-1])
        print(f"split_vs_reference = {diff:.3e}")
    print(f"epsilon = {solver.eps:.6g}, v_max = {solver.v_max:.6g}, outputs in {out}")
    return EXIT_OK


def _validation_points(problem: Problem, rng, count):
    closure, cfg = problem.closure, problem.cfg
    pts = np.zeros((count, closure.d))
    pts[:, 1] = rng.uniform(cfg.metric.r0, cfg.grid.r_outer, count)
    if closure.polar is not None:
        pts[:, closure.polar] = rng.uniform(0.1, math.pi - 0.1, count)
    return pts


def run_validation(problem: Problem, n_points: int = 200):
    """Invariant suite for one configuration; returns ``[(name, value, tol, ok)]``."""
    cfg, closure = problem.cfg, problem.closure
    rng = np.random.default_rng(cfg.run.seed)
    rep = flat_clifford_rep(closure.d)
    results = []

    def check(name, value, tol):
        results.append((name, float(value), tol, bool(value <= tol)))

    clifford = 0.0
    for x in _validation_points(problem, rng, n_points):
        s = closure.sample(x)
        gam = curved_gammas(rep, build_vielbein(s))
        for j in range(closure.d):
            for k in range(closure.d):
                ac = gam[j] @ gam[k] + gam[k] @ gam[j]
                clifford = max(clifford, np.abs(ac - 2 * s.ginv[j, k] * np.eye(rep.f)).max())
    check("clifford_anticommutator", clifford, 1e-12)

    det_err = 0.0
    for x in _validation_points(problem, rng, n_points):
        sym = principal_symbol(closure, rep, x, rng.normal(size=closure.d - 1))
        det_err = max(det_err, abs(sym.detP - sym.det_formula) / max(1.0, abs(sym.detP)))
    check("symbol_determinant", det_err, 1e-10)

    x0 = np.zeros(closure.d)
    x0[1] = cfg.metric.r0
    if closure.polar is not None:
        x0[closure.polar] = 1.0
    pr = boundary_projector(closure.sample(x0), rep)
    check("projector_idempotent", np.abs(pr.P @ pr.P - pr.P).max(), 1e-12)

    H = assemble_hamiltonian(problem.grid, closure, B=problem.B, m=problem.m, rep=rep)
    check("hamiltonian_hermiticity", H.hermiticity(), cfg.tolerances.hermiticity)

    region = build_region_X(closure, problem.grid, cfg.r_mid, B=problem.B, m=problem.m, rep=rep,
                            data=H.nodes)
    basis = eigendecompose_X(region.H.H, region.H.w, tol=cfg.tolerances.hermiticity)
    check("eigenbasis_orthonormality", basis.orthonormality_error(), 1e-10)

    psi0 = bump_for(problem)
    check("compatibility_residuals", max(compatibility_residuals(psi0, H, cfg.spectral.p_max)), 0.0)

    econf = _evolution_config(problem)
    from .evolution import CrankNicolson
    cn = CrankNicolson(H.H, econf.dt)
    c = H.to_reduced(psi0)
    n0 = H.norm(c)
    for _ in range(1000):
        c = cn.step(c)
    check("crank_nicolson_norm_drift", abs(H.norm(c) - n0) / n0, 1e-12)
    return results


def cmd_validate(problem: Problem, args) -> int:
    results = run_validation(problem, n_points=args.points)
    for name, value, tol, ok in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (tolerance {tol:.1e})")
    return EXIT_OK if all(r[3] for r in results) else EXIT_NUMERIC


# --------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirac_bvp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("horizons", help="closed-form and scanned horizon radii (CSV)")
    p.add_argument("config")
    p.add_argument("--n-scan", type=int, default=400)
    p = sub.add_parser("symbol", help="principal symbol and determinant check at a point")
    p.add_argument("config")
    p.add_argument("--at", required=True, help="r or r,theta")
    p.add_argument("--xi", required=True, help="spatial covector components")
    p = sub.add_parser("spectrum", help="eigendecomposition on the region X; writes spectrum.csv")
    p.add_argument("config")
    p = sub.add_parser("evolve", help="split evolution with diagnostics and snapshots")
    p.add_argument("config")
    p.add_argument("--reference", action="store_true", help="also run the monolithic reference")
    p.add_argument("--reference-only", action="store_true", help="run only the reference solver")
    p = sub.add_parser("validate", help="invariant suite; exit 0 iff all checks pass")
    p.add_argument("config")
    p.add_argument("--points", type=int, default=200)
    return parser


COMMANDS = {
    "horizons": cmd_horizons,
    "symbol": cmd_symbol,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        problem = build_problem(cfg)
        return COMMANDS[args.command](problem, args)
    except (ConfigError, EvolutionConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WindowViolation as exc:
        print(f"window violation: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except (SpectralError, InstabilityError, GeometryError) as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
