"""Fixed-point iteration for the nonlinear stabilized system.

One constant matrix M = A + B0 per mesh (B0 the full artificial-diffusion
envelope, alpha = 0) is factored once; the solution-dependent part moves
to the right-hand side:  M u_hat = F + (B0 - B(u_k)) u_k.  Updates are
damped, the step is rejected and the damping halved whenever the residual
would grow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .assembly import AssembledSystem
from .mesh import Mesh
from .problem import ProblemSpec, RunConfig
from .sparse import SparseMatrix
from .stabilization import SmuasLimiter

log = logging.getLogger("stabfem.solver")


@dataclass
class SolveStats:
    iterations: int
    rejections: int
    final_residual: float
    converged: bool


def nonlinear_residual(sys: AssembledSystem, b: SparseMatrix, u: np.ndarray) -> float:
    """Euclidean norm of F - (A + B(u)) u on non-Dirichlet rows.

    Dirichlet components contribute u_D(x_i) - u_i.
    """
    if len(u) != sys.A.n:
        raise ValueError("solution vector dimension mismatch")
    r = sys.F - sys.A.matvec(u) - b.matvec(u)
    r[sys.dirichlet] = sys.dirichlet_values[sys.dirichlet] - u[sys.dirichlet]
    return float(np.linalg.norm(r))


def _replace_dirichlet_rows(a: SparseMatrix, mask: np.ndarray) -> SparseMatrix:
    vals = a.values.copy()
    row_of = np.repeat(np.arange(a.n), np.diff(a.row_ptr))
    vals[mask[row_of]] = 0.0
    vals[a.diagonal_slots()[mask]] = 1.0
    return a.copy_with_values(vals)


def solve_nonlinear(sys: AssembledSystem, mesh: Mesh, p: ProblemSpec,
                    cfg: RunConfig, u0: np.ndarray,
                    limiter=None) -> tuple[np.ndarray, SolveStats]:
    """Run the damped fixed-point iteration from u0.

    Stops when the residual drops below tol_scale * sqrt(#dofs) or when
    iterations + rejections reach the configured budget; non-convergence
    is reported in the stats, not raised.

    `limiter` may be a limiter factory or one already bound to (A, mesh).
    """
    limiter = limiter or SmuasLimiter()
    bound = limiter.bind(sys.A, mesh) if hasattr(limiter, "bind") else limiter
    b0 = bound.initial_term()
    m = sys.A.copy_with_values(sys.A.values + b0.values)
    lu = _replace_dirichlet_rows(m, sys.dirichlet).factor()

    u = np.asarray(u0, dtype=float).copy()
    u[sys.dirichlet] = sys.dirichlet_values[sys.dirichlet]
    b_u = bound.stabilization(u, sys.dirichlet)
    res = nonlinear_residual(sys, b_u, u)
    tol = cfg.nonlinear_tol_scale * np.sqrt(sys.A.n)

    omega = 1.0
    iterations = 0
    rejections = 0
    u_hat = None
    while res >= tol and iterations + rejections < cfg.max_nonlinear_iters:
        if u_hat is None:
            diff = sys.A.copy_with_values(b0.values - b_u.values)
            rhs = sys.F + diff.matvec(u)
            rhs[sys.dirichlet] = sys.dirichlet_values[sys.dirichlet]
            u_hat = lu.solve(rhs)
        trial = u + omega * (u_hat - u)
        b_trial = bound.stabilization(trial, sys.dirichlet)
        r_trial = nonlinear_residual(sys, b_trial, trial)
        if r_trial < res:
            u, b_u, res = trial, b_trial, r_trial
            omega = min(1.0, 1.5 * omega)
            iterations += 1
            u_hat = None
            log.debug("iter %d: residual %.3e, omega %.3g, accepted",
                      iterations, res, omega)
        else:
            omega *= 0.5
            rejections += 1
            log.debug("iter %d: residual %.3e -> %.3e, omega %.3g, rejected",
                      iterations, res, r_trial, omega)

    return u, SolveStats(iterations=iterations, rejections=rejections,
                         final_residual=res, converged=bool(res < tol))
