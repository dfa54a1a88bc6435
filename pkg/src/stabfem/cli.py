"""Command-line interface and machine-readable run outputs.

Configuration is a flat ``key = value`` text file; recognized keys are
problem, theta, eta_stop, dof_stop, max_iters, quad_degree and out_dir.
A run writes record.csv (one flushed row per adaptive step), mesh_<step>.vtk
and solution_<step>.txt into the output directory, which is locked by a
LOCK presence file for the duration of the run.

Exit codes: 0 success, 1 configuration error, 2 nonlinear solver failed to
converge at some step, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import adaptive_loop
from .assembly import assemble
from .estimator import compute_eta, efficiency_index
from .mesh import Mesh, read_vtk, uniform_refine, write_vtk, initial_unit_square
from .problem import PROBLEMS, RunConfig, get_problem
from .solver import solve_nonlinear
from .stabilization import SmuasLimiter

CSV_HEADER = "step,dofs,eta,eta1,eta2,eta3,energy_error,iterations,rejections,wall_ms"

_CONFIG_KEYS = {
    "problem": str,
    "theta": float,
    "eta_stop": float,
    "dof_stop": int,
    "max_iters": int,
    "quad_degree": int,
    "out_dir": str,
}
_KEY_TO_FIELD = {"max_iters": "max_nonlinear_iters"}


class ConfigError(Exception):
    pass


def parse_config(path: str | None, overrides: list[str] | None = None) -> RunConfig:
    """Read a flat key = value file and apply key=value overrides."""
    entries: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        entries[key] = value

    kwargs = {}
    for key, value in entries.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            kwargs[_KEY_TO_FIELD.get(key, key)] = _CONFIG_KEYS[key](value)
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {err}") from err
    try:
        cfg = RunConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {cfg.problem!r}")
    return cfg


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return f"{x:.17g}"


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lock = out / "LOCK"
        if lock.exists():
            print(f"error: {lock} exists; another run owns {out}", file=sys.stderr)
            return 3
        lock.write_text("running\n")
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3

    p = get_problem(cfg.problem)
    try:
        csv = open(out / "record.csv", "w")
        csv.write(CSV_HEADER + "\n")
        csv.flush()

        def on_step(step, mesh, u, rec, report):
            row = [
                str(rec.step), str(rec.dofs), _fmt(rec.eta), _fmt(rec.eta1),
                _fmt(rec.eta2), _fmt(rec.eta3), _fmt(rec.energy_error),
                str(rec.iterations), str(rec.rejections), _fmt(rec.wall_ms),
            ]
            csv.write(",".join(row) + "\n")
            csv.flush()
            write_vtk(mesh, out / f"mesh_{step}.vtk", point_data={"u": u})
            with open(out / f"solution_{step}.txt", "w") as fh:
                for v in u:
                    fh.write(f"{v:.17g}\n")
            print(f"step {rec.step}: dofs {rec.dofs}, eta {rec.eta:.6g}, "
                  f"error {rec.energy_error if rec.energy_error is not None else float('nan'):.6g}, "
                  f"iters+rej {rec.iterations + rec.rejections}")

        record = adaptive_loop(p, cfg, on_step=on_step)
        csv.close()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    finally:
        lock.unlink(missing_ok=True)
    return 0 if record.all_converged else 2


def cmd_estimate_only(cfg: RunConfig, step: int) -> int:
    out = Path(cfg.out_dir)
    p = get_problem(cfg.problem)
    try:
        mesh = read_vtk(out / f"mesh_{step}.vtk", p.boundary_classifier)
        u = np.loadtxt(out / f"solution_{step}.txt")
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    sys_ = assemble(mesh, p, cfg.quad_degree, cfg.edge_quad_points)
    bound = SmuasLimiter().bind(sys_.A, mesh)
    b = bound.stabilization(u, sys_.dirichlet)
    report = compute_eta(mesh, p, u, b, quad_degree=cfg.estimator_degree,
                         edge_quad_points=cfg.edge_quad_points)
    print(f"eta = {report.eta:.17g}")
    print(f"eta1 = {report.eta1:.17g}")
    print(f"eta2 = {report.eta2:.17g}")
    print(f"eta3 = {report.eta3:.17g}")
    if report.energy_error is not None:
        print(f"energy_error = {report.energy_error:.17g}")
        print(f"efficiency = {efficiency_index(report):.17g}")
    return 0


def perturbed_mesh(mesh: Mesh, amount: float = 0.1, seed: int = 0) -> Mesh:
    """Randomly shift interior vertices by `amount` of the local edge length."""
    rng = np.random.default_rng(seed)
    coords = mesh.coords.copy()
    interior = np.setdiff1d(np.arange(mesh.num_vertices), mesh.boundary_vertices)
    h_loc = np.full(mesh.num_vertices, np.inf)
    for k in (0, 1):
        np.minimum.at(h_loc, mesh.edges[:, k], mesh.edge_lengths)
    shift = rng.uniform(-amount, amount, size=(len(interior), 2))
    coords[interior] += shift * h_loc[interior][:, None]
    return Mesh(coords, mesh.cells, boundary_classifier=mesh.boundary_classifier)


def cmd_dmp_test(cfg: RunConfig, seed: int = 0) -> int:
    p = get_problem("dmp_test")
    base = initial_unit_square(p.boundary_classifier)
    for _ in range(3):
        base = uniform_refine(base)
    fine = uniform_refine(base)
    meshes = [("uniform-81", base), ("uniform-289", fine),
              ("perturbed-289", perturbed_mesh(fine, 0.1, seed))]
    # bound checks examine the converged solution itself, so solve well
    # below the 1e-10 tolerance granted to the extrema
    cfg = replace(cfg, nonlinear_tol_scale=min(cfg.nonlinear_tol_scale, 1e-12))
    ok = True
    for name, mesh in meshes:
        sys_ = assemble(mesh, p, cfg.quad_degree, cfg.edge_quad_points)
        u, stats = solve_nonlinear(sys_, mesh, p, cfg, np.zeros(mesh.num_vertices))
        lo, hi = float(u.min()), float(u.max())
        bounded = -1e-10 <= lo and hi <= 1.0 + 1e-10
        ok = ok and bounded and stats.converged
        print(f"{name}: min {lo:.3e}, max {1 - hi:+.3e} from 1, "
              f"converged {stats.converged}, bounds {'ok' if bounded else 'VIOLATED'}")
    return 0 if ok else 2


def cmd_dump_limiters(cfg: RunConfig, refinements: int) -> int:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    p = get_problem(cfg.problem)
    mesh = initial_unit_square(p.boundary_classifier)
    for _ in range(refinements):
        mesh = uniform_refine(mesh)
    sys_ = assemble(mesh, p, cfg.quad_degree, cfg.edge_quad_points)
    bound = SmuasLimiter().bind(sys_.A, mesh)
    u, stats = solve_nonlinear(sys_, mesh, p, cfg, np.zeros(mesh.num_vertices), bound)
    state = bound.state(u, sys_.dirichlet)
    sys_.A.copy_with_values(state.alpha).mm_write(out / "alpha.mtx")
    bound.stabilization(u, sys_.dirichlet).mm_write(out / "b.mtx")
    print(f"wrote {out / 'alpha.mtx'} and {out / 'b.mtx'} "
          f"({mesh.num_vertices} dofs, converged {stats.converged})")
    return 0 if stats.converged else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stabfem",
        description="Adaptive stabilized FEM solver for convection-diffusion-reaction",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="path to a key = value configuration file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration key")
        sp.add_argument("-v", "--verbose", action="store_true",
                        help="log every nonlinear iteration")

    sp = sub.add_parser("run", help="full adaptive run with CSV/VTK outputs")
    common(sp)
    sp = sub.add_parser("estimate-only", help="re-estimate a stored step")
    common(sp)
    sp.add_argument("--step", type=int, required=True)
    sp = sub.add_parser("dmp-test", help="solution-bound checks on three meshes")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("dump-limiters", help="write alpha and B in MatrixMarket format")
    common(sp)
    sp.add_argument("--refinements", type=int, default=2,
                    help="uniform refinements of the initial mesh (default 2)")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config, args.overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1

    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "estimate-only":
        return cmd_estimate_only(cfg, args.step)
    if args.command == "dmp-test":
        return cmd_dmp_test(cfg, args.seed)
    if args.command == "dump-limiters":
        return cmd_dump_limiters(cfg, args.refinements)
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
