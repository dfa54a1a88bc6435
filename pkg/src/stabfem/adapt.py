"""The adaptive loop: solve, estimate, mark (maximum strategy), refine.

The run starts from the two-triangle unit square, uniformly refined to 25
dofs, then performs two further uniform steps before switching to
adaptive red-green refinement.  Every visited mesh is solved, estimated
and recorded, including the final mesh that crosses the dof budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import assemble
from .estimator import EstimatorConfig, EstimatorReport, compute_eta
from .mesh import (Mesh, initial_unit_square, interpolate_to_refined,
                   red_green_refine, uniform_refine)
from .problem import ProblemSpec, RunConfig
from .solver import SolveStats, solve_nonlinear
from .stabilization import SmuasLimiter

UNIFORM_STEPS = 2  # uniform refinements recorded after the 25-dof start


@dataclass
class StepRecord:
    step: int
    dofs: int
    eta: float
    eta1: float
    eta2: float
    eta3: float
    energy_error: Optional[float]
    iterations: int
    rejections: int
    wall_ms: float
    converged: bool


@dataclass
class RunRecord:
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(s.converged for s in self.steps)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps], dtype=float)


def mark_maximum(per_cell: np.ndarray, theta: float) -> set[int]:
    """Cells whose indicator reaches theta times the largest indicator."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")
    per_cell = np.asarray(per_cell, dtype=float)
    if per_cell.size == 0:
        raise ValueError("no cells to mark")
    return set(np.nonzero(per_cell >= theta * per_cell.max())[0].tolist())


StepCallback = Callable[[int, Mesh, np.ndarray, StepRecord, EstimatorReport], None]


def adaptive_loop(p: ProblemSpec, cfg: RunConfig, limiter=None,
                  est_cfg: EstimatorConfig = EstimatorConfig(),
                  on_step: Optional[StepCallback] = None) -> RunRecord:
    """Run the full benchmark protocol and return the per-step record."""
    limiter = limiter or SmuasLimiter()
    mesh = initial_unit_square(p.boundary_classifier)
    for _ in range(2):
        mesh = uniform_refine(mesh)  # 25 dofs

    record = RunRecord()
    u = np.zeros(mesh.num_vertices)
    step = 0
    while True:
        t0 = time.perf_counter()
        sys = assemble(mesh, p, cfg.quad_degree, cfg.edge_quad_points)
        bound = limiter.bind(sys.A, mesh)
        u, stats = solve_nonlinear(sys, mesh, p, cfg, u, bound)
        b = bound.stabilization(u, sys.dirichlet)
        report = compute_eta(mesh, p, u, b, est_cfg,
                             cfg.estimator_degree, cfg.edge_quad_points)
        wall_ms = 1e3 * (time.perf_counter() - t0)

        rec = StepRecord(
            step=step, dofs=mesh.num_vertices,
            eta=report.eta, eta1=report.eta1, eta2=report.eta2,
            eta3=report.eta3, energy_error=report.energy_error,
            iterations=stats.iterations, rejections=stats.rejections,
            wall_ms=wall_ms, converged=stats.converged,
        )
        record.steps.append(rec)
        if on_step is not None:
            on_step(step, mesh, u, rec, report)

        if report.eta <= cfg.eta_stop or mesh.num_vertices >= cfg.dof_stop:
            break
        if step < UNIFORM_STEPS:
            fine = uniform_refine(mesh)
        else:
            marked = mark_maximum(report.per_cell, cfg.theta)
            fine = red_green_refine(mesh, marked)
        u = interpolate_to_refined(mesh, fine, u)
        mesh = fine
        step += 1
    return record
