import time

import numpy as np
import pytest

import stabfem as sf


@pytest.fixture(scope="session")
def benchmark():
    return sf.get_problem("known_boundary_layer")


def _solve_uniform(p, levels, cfg):
    mesh = sf.initial_unit_square(p.boundary_classifier)
    for _ in range(levels):
        mesh = sf.uniform_refine(mesh)
    sys = sf.assemble(mesh, p, cfg.quad_degree, cfg.edge_quad_points)
    bound = sf.SmuasLimiter().bind(sys.A, mesh)
    u, stats = sf.solve_nonlinear(sys, mesh, p, cfg, np.zeros(mesh.num_vertices), bound)
    b = bound.stabilization(u, sys.dirichlet)
    return mesh, sys, u, stats, b


@pytest.fixture(scope="session")
def solved_uniform(benchmark):
    """Benchmark solved on the 81- and 289-dof uniform meshes (timed)."""
    cfg = sf.RunConfig()
    t0 = time.perf_counter()
    out = {81: _solve_uniform(benchmark, 3, cfg),
           289: _solve_uniform(benchmark, 4, cfg)}
    out["wall_s"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def full_run(benchmark):
    """The complete adaptive benchmark run (takes on the order of a minute)."""
    cfg = sf.RunConfig()
    captured = {}

    def on_step(step, mesh, u, rec, report):
        x = mesh.coords[:, 0]
        captured[step] = {
            "dofs": mesh.num_vertices,
            "strip_vertices": int((x >= 0.99).sum()),
        }

    record = sf.adaptive_loop(benchmark, cfg, on_step=on_step)
    return record, captured
