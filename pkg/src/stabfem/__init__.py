"""Adaptive algebraically stabilized P1 FEM for convection-diffusion-reaction."""

__version__ = "0.1.0"

from .adapt import RunRecord, StepRecord, adaptive_loop, mark_maximum
from .assembly import AssembledSystem, assemble, energy_error_sq, energy_norm_sq
from .estimator import (EstimatorConfig, EstimatorReport, compute_eta,
                        efficiency_index, element_residuals, face_residuals)
from .mesh import (Mesh, initial_unit_square, interpolate_to_refined,
                   read_vtk, red_green_refine, uniform_refine, write_vtk)
from .problem import ProblemSpec, RunConfig, get_problem, verify_coercivity
from .solver import SolveStats, nonlinear_residual, solve_nonlinear
from .sparse import (LUFactor, SingularMatrixError, SparseMatrix,
                     factor_and_solve, matvec)
from .stabilization import (GalerkinLimiter, LimiterState, SmuasLimiter,
                            UpwindGeometry, build_stabilization,
                            compute_limiters, edge_coefficients, upwind_value)
