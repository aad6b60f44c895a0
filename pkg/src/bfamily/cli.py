"""Command-line front door: batch solvers, diagnostics, and experiments.

Exit-code protocol: 0 success, 1 configuration error, 2 blow-up or other
numerical termination, 3 acceptance-tolerance failure.  All artifacts are
deterministic: identical configs produce identical bytes on the same
platform profile, and every manifest embeds the config hash.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import RunConfig, load_config
from .diagnostics import conservation_residual
from .dynamics import COMPLETED, solve_eulerian, solve_geodesic
from .errors import (
    BFamilyError,
    ConfigError,
    DegenerateProbeError,
    ExpDomainError,
)
from .experiments import NonUniformityConfig, nonuniformity_experiment, scaling_check
from .io import (
    write_conservation_csv,
    write_diffeo_csv,
    write_experiment_csv,
    write_field_csv,
    write_json,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_ACCEPTANCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _base_manifest(cfg: RunConfig, **extra) -> dict:
    payload = {
        "command": cfg.command,
        "config": cfg.canonical_text(),
        "config_hash": cfg.config_hash(),
    }
    payload.update(extra)
    return payload


def _effective(params, solver) -> dict:
    """Structured record of what actually ran (dt may be auto-derived)."""
    return {
        "params": {"b": params.b, "s": params.s},
        "solver": {
            "dt": solver.dt,
            "T": solver.T,
            "snapshot_stride": solver.snapshot_stride,
            "blowup_norm_cap": solver.blowup_norm_cap,
            "min_phix": solver.min_phix,
        },
    }


def _write_eulerian_snapshots(out: Path, traj) -> list:
    entries = []
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        name = f"u_{i:06d}.csv"
        write_field_csv(out / name, state)
        entries.append({"t": float(t), "files": [name]})
    return entries


def _write_lagrangian_snapshots(out: Path, traj) -> list:
    entries = []
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        phi_name = f"phi_{i:06d}.csv"
        vel_name = f"vel_{i:06d}.csv"
        write_diffeo_csv(out / phi_name, state.phi)
        write_field_csv(out / vel_name, state.phit)
        entries.append({"t": float(t), "files": [phi_name, vel_name]})
    return entries


def run_solve(cfg: RunConfig, out: Path, formulation: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.build_grid()
    u0 = cfg.build_field(grid)
    params = cfg.build_params()
    solver = cfg.build_solver(u0)
    if formulation == "eulerian":
        traj = solve_eulerian(u0, params, solver)
        snapshots = _write_eulerian_snapshots(out, traj)
    elif formulation == "lagrangian":
        traj = solve_geodesic(u0, params, solver)
        snapshots = _write_lagrangian_snapshots(out, traj)
    else:
        raise ConfigError(f"unknown formulation '{formulation}'")
    manifest = _base_manifest(
        cfg,
        formulation=formulation,
        termination=traj.termination,
        times=[float(t) for t in traj.times],
        snapshots=snapshots,
        **_effective(params, solver),
    )
    write_json(out / "manifest.json", manifest)
    return EXIT_OK if traj.termination == COMPLETED else EXIT_BLOWUP


def run_conserve(cfg: RunConfig, out: Path, tol: float) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.build_grid()
    u0 = cfg.build_field(grid)
    params = cfg.build_params()
    solver = cfg.build_solver(u0)
    traj = solve_geodesic(u0, params, solver)
    report = conservation_residual(traj, params, relative=True)
    write_conservation_csv(out / "report.csv", report)
    ok = traj.termination == COMPLETED and report.max_residual <= tol
    manifest = _base_manifest(
        cfg,
        termination=traj.termination,
        tol=tol,
        max_residual=report.max_residual,
        passed=ok,
        **_effective(params, solver),
    )
    write_json(out / "manifest.json", manifest)
    if traj.termination != COMPLETED:
        return EXIT_BLOWUP
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def run_nonuniform(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.build_grid()
    u0 = cfg.build_field(grid, "initial")
    v = cfg.build_field(grid, "probe")
    params = cfg.build_params()
    solver = cfg.build_solver(u0)
    experiment = NonUniformityConfig(
        u0=u0,
        v=v,
        params=params,
        R=cfg["experiment.R"],
        n_values=cfg["experiment.n_values"],
        solver=solver,
        eps_dexp=cfg["experiment.eps_dexp"],
    )
    report = nonuniformity_experiment(experiment, jobs=jobs)
    write_experiment_csv(out / "report.csv", report)
    persistent = report.separation_persistence_ok()
    manifest = _base_manifest(
        cfg,
        m_est=report.m_est,
        x0_est=report.x0_est,
        L_est=report.L_est,
        resolved_n=[r.n for r in report.resolved_rows()],
        separation_persistent=persistent,
        **_effective(params, solver),
    )
    write_json(out / "manifest.json", manifest)
    return EXIT_OK if persistent else EXIT_ACCEPTANCE


def run_exp(cfg: RunConfig, out: Path) -> int:
    from dataclasses import replace

    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.build_grid()
    v = cfg.build_field(grid)
    params = cfg.build_params()
    solver = cfg.build_solver(v)
    traj = solve_geodesic(v, params, replace(solver, T=1.0))
    if traj.termination != COMPLETED:
        manifest = _base_manifest(
            cfg, termination=traj.termination, **_effective(params, solver)
        )
        write_json(out / "manifest.json", manifest)
        return EXIT_BLOWUP
    phi = traj.final_state.phi
    write_diffeo_csv(out / "phi.csv", phi)
    manifest = _base_manifest(
        cfg,
        termination=traj.termination,
        snapshot="phi.csv",
        **_effective(params, solver),
    )
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def run_scalecheck(cfg: RunConfig, out: Path, tol: float | None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.build_grid()
    u0 = cfg.build_field(grid)
    params = cfg.build_params()
    solver = cfg.build_solver(u0)
    lam = cfg["experiment.lambda"]
    residual = scaling_check(u0, lam, cfg["solver.T"], params, solver)
    manifest = _base_manifest(
        cfg,
        residual=residual,
        scale=lam,
        horizon=cfg["solver.T"],
        **_effective(params, solver),
    )
    write_json(out / "manifest.json", manifest)
    if tol is not None and residual > tol:
        return EXIT_ACCEPTANCE
    return EXIT_OK


_WRAPPED_RUNNERS = {"solve", "conserve", "nonuniform", "exp", "scalecheck"}


def _run_cell(payload) -> int:
    command, values, out_dir, formulation, tol = payload
    cfg = RunConfig(command, values)
    out = Path(out_dir)
    try:
        if command == "solve":
            return run_solve(cfg, out, formulation)
        if command == "conserve":
            return run_conserve(cfg, out, tol if tol is not None else 1e-4)
        if command == "nonuniform":
            return run_nonuniform(cfg, out)
        if command == "exp":
            return run_exp(cfg, out)
        if command == "scalecheck":
            return run_scalecheck(cfg, out, tol)
        return EXIT_CONFIG
    except (ConfigError, DegenerateProbeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BFamilyError as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_BLOWUP


def run_sweep(cfg: RunConfig, out: Path, jobs: int, formulation: str, tol) -> int:
    from .config import _schema_for

    wrapped = cfg["sweep.command"]
    if wrapped not in _WRAPPED_RUNNERS:
        raise ConfigError(f"sweep.command must be one of {sorted(_WRAPPED_RUNNERS)}")
    b_values = cfg["sweep.b"] or (cfg["params.b"],)
    n_values = cfg["sweep.N"] or (cfg["grid.N"],)
    # resolve the wrapped command's schema against the actual values so
    # non-default initial/probe families keep their keys in the cells
    pseudo_pairs = {
        k: (str(v), 0) for k, v in cfg.values.items() if v is not None
    }
    wrapped_schema = _schema_for(wrapped, pseudo_pairs)
    out.mkdir(parents=True, exist_ok=True)

    cells = []
    for b in b_values:
        for n in n_values:
            values = {
                k: cfg.values[k] for k in wrapped_schema if k in cfg.values
            }
            for key, (kind, default) in wrapped_schema.items():
                values.setdefault(key, default)
            values["params.b"] = float(b)
            values["grid.N"] = int(n)
            name = f"b{b:g}_N{n}"
            cells.append((name, b, n, values))

    index = []
    pending = []
    for name, b, n, values in cells:
        cell_dir = out / name
        if (cell_dir / "manifest.json").exists():
            index.append(
                {"cell": name, "b": float(b), "N": int(n), "skipped": True, "exit_code": 0}
            )
            continue
        pending.append((name, b, n, (wrapped, values, str(cell_dir), formulation, tol)))

    results = {}
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_run_cell, [p[3] for p in pending]))
        for (name, _, _, _), code in zip(pending, codes):
            results[name] = code
    else:
        for name, _, _, payload in pending:
            results[name] = _run_cell(payload)

    for name, b, n, _ in pending:
        index.append(
            {
                "cell": name,
                "b": float(b),
                "N": int(n),
                "skipped": False,
                "exit_code": results[name],
            }
        )
    index.sort(key=lambda row: row["cell"])
    write_json(
        out / "index.json",
        {"command": wrapped, "config_hash": cfg.config_hash(), "cells": index},
    )
    return max((row["exit_code"] for row in index), default=EXIT_OK)


def build_parser() -> _Parser:
    parser = _Parser(prog="bfamily", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a key = value config")
        p.add_argument("--out", required=True, help="output directory")

    p_solve = sub.add_parser("solve", help="run one trajectory")
    common(p_solve)
    p_solve.add_argument(
        "--formulation", choices=("eulerian", "lagrangian"), default="eulerian"
    )

    p_cons = sub.add_parser("conserve", help="momentum-transport residual check")
    common(p_cons)
    p_cons.add_argument("--tol", type=float, default=1e-4)

    p_non = sub.add_parser("nonuniform", help="shrinking-bump separation experiment")
    common(p_non)
    p_non.add_argument("--jobs", type=int, default=1)

    p_exp = sub.add_parser("exp", help="evaluate the exponential map at T = 1")
    common(p_exp)

    p_scale = sub.add_parser("scalecheck", help="time-amplitude scaling residual")
    common(p_scale)
    p_scale.add_argument("--tol", type=float, default=None)

    p_sweep = sub.add_parser("sweep", help="cartesian parameter sweep")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument(
        "--formulation", choices=("eulerian", "lagrangian"), default="eulerian"
    )
    p_sweep.add_argument("--tol", type=float, default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        out = Path(args.out)
        if args.command == "sweep":
            cfg = load_config(args.config, "sweep")
            return run_sweep(cfg, out, args.jobs, args.formulation, args.tol)
        cfg = load_config(args.config, args.command)
        if args.command == "solve":
            return run_solve(cfg, out, args.formulation)
        if args.command == "conserve":
            return run_conserve(cfg, out, args.tol)
        if args.command == "nonuniform":
            return run_nonuniform(cfg, out, args.jobs)
        if args.command == "exp":
            return run_exp(cfg, out)
        if args.command == "scalecheck":
            return run_scalecheck(cfg, out, args.tol)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, DegenerateProbeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ExpDomainError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except BFamilyError as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
