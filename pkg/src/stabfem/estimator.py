"""Residual-based a posteriori error estimation in the energy norm.

The global estimate splits into a cell-residual part, a face-jump part and
an edge part fed by the stabilization matrix:

    eta^2 = eta1^2 + eta2^2 + eta3^2,
    eta1^2 = sum_K min{4 C_I^2/sigma, 4 C_I^2 h_K^2/eps} ||R_K||^2,
    eta2^2 = sum_F min{4 C_F^2 h_F/eps, 4 C_F^2/(sigma^0.5 eps^0.5)} ||R_F||^2,
    eta3^2 = sum_E min{4 k1 h_E^2/eps, 4 k2/sigma} |b_E|^2 h_E^{-1} ||grad u_h . t_E||^2,

with all constants except the explicit factor 4 set to one by default.
Per-cell indicators split face and edge terms evenly between the adjacent
cells so they sum back to eta^2 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import energy_error_sq
from .mesh import DIRICHLET, INTERIOR, NEUMANN, Mesh
from .problem import ProblemSpec
from .quadrature import physical_points, segment_rule, triangle_rule
from .sparse import SparseMatrix
from .stabilization import edge_coefficients


@dataclass
class EstimatorConfig:
    c_interp: float = 1.0
    c_trace: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    cy_factor: float = 4.0

    def __post_init__(self):
        for name in ("c_interp", "c_trace", "kappa1", "kappa2", "cy_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class EstimatorReport:
    eta: float
    eta1: float
    eta2: float
    eta3: float
    per_cell: np.ndarray            # eta_K, one per cell
    energy_error: Optional[float] = None


def element_residuals(mesh: Mesh, p: ProblemSpec, u_h: np.ndarray,
                      quad_degree: int = 4) -> np.ndarray:
    """Per-cell ||f - b.grad(u_h) - c u_h||^2 (the P1 Laplacian vanishes)."""
    lam, w = triangle_rule(quad_degree)
    pts = physical_points(lam, mesh.cell_coords)
    x, y = pts[..., 0], pts[..., 1]
    bx, by = p.b(x, y)
    grads = mesh.cell_gradients(u_h)
    uh = np.einsum("qk,ck->cq", lam, u_h[mesh.cells])
    r = (p.f(x, y) - bx * grads[:, 0][:, None] - by * grads[:, 1][:, None]
         - p.c(x, y) * uh)
    return mesh.areas * np.einsum("cq,q->c", r * r, w)


def face_residuals(mesh: Mesh, p: ProblemSpec, u_h: np.ndarray,
                   edge_quad_points: int = 4) -> np.ndarray:
    """Per-face ||R_F||^2: diffusive-flux jumps, Neumann mismatch, 0 on Dirichlet."""
    grads = mesh.cell_gradients(u_h)
    tang = mesh.coords[mesh.edges[:, 1]] - mesh.coords[mesh.edges[:, 0]]
    h = mesh.edge_lengths
    normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / h[:, None]

    out = np.zeros(mesh.num_edges)

    interior = mesh.edge_tag == INTERIOR
    c1 = mesh.edge_cells[interior, 0]
    c2 = mesh.edge_cells[interior, 1]
    jump = np.einsum("ei,ei->e", grads[c1] - grads[c2], normal[interior])
    out[interior] = (p.epsilon * jump) ** 2 * h[interior]

    neumann = np.nonzero(mesh.edge_tag == NEUMANN)[0]
    if len(neumann):
        t, wt = segment_rule(edge_quad_points)
        p0 = mesh.coords[mesh.edges[neumann, 0]]
        p1 = mesh.coords[mesh.edges[neumann, 1]]
        qx = p0[:, 0][:, None] * (1 - t) + p1[:, 0][:, None] * t
        qy = p0[:, 1][:, None] * (1 - t) + p1[:, 1][:, None] * t
        cell = mesh.edge_cells[neumann, 0]
        # orient the normal outward from the single adjacent cell
        cent = mesh.cell_coords[cell].mean(axis=1)
        mid = 0.5 * (p0 + p1)
        sign = np.sign(np.einsum("ei,ei->e", normal[neumann], mid - cent))
        nrm = normal[neumann] * sign[:, None]
        flux = p.epsilon * np.einsum("ei,ei->e", grads[cell], nrm)
        r = p.g_neumann(qx, qy) - flux[:, None]
        out[neumann] = h[neumann] * np.einsum("eq,q->e", r * r, wt)
    return out


def compute_eta(mesh: Mesh, p: ProblemSpec, u_h: np.ndarray, b: SparseMatrix,
                cfg: EstimatorConfig = EstimatorConfig(),
                quad_degree: int = 4, edge_quad_points: int = 4,
                with_energy_error: bool = True) -> EstimatorReport:
    """Assemble the three estimator terms and their per-cell localization."""
    if p.sigma <= 0.0:
        raise ValueError(
            "the estimator requires sigma > 0 (coercive reaction part)"
        )
    eps, sigma = p.epsilon, p.sigma
    cy = cfg.cy_factor

    rk = element_residuals(mesh, p, u_h, quad_degree)
    w1 = np.minimum(cy * cfg.c_interp ** 2 / sigma,
                    cy * cfg.c_interp ** 2 * mesh.cell_diameters ** 2 / eps)
    cell_term = w1 * rk

    rf = face_residuals(mesh, p, u_h, edge_quad_points)
    h_f = mesh.edge_lengths
    w2 = np.minimum(cy * cfg.c_trace ** 2 * h_f / eps,
                    cy * cfg.c_trace ** 2 / np.sqrt(sigma * eps))
    face_term = w2 * rf

    b_e = edge_coefficients(b, mesh)
    du = u_h[mesh.edges[:, 1]] - u_h[mesh.edges[:, 0]]
    w3 = np.minimum(cy * cfg.kappa1 * h_f ** 2 / eps, cy * cfg.kappa2 / sigma)
    # h_E^{1-d} ||grad u_h . t_E||^2 = (u_j - u_i)^2 / h_E^2 for d = 2
    edge_term = w3 * b_e ** 2 * du ** 2 / h_f ** 2

    eta1 = float(np.sqrt(cell_term.sum()))
    eta2 = float(np.sqrt(face_term.sum()))
    eta3 = float(np.sqrt(edge_term.sum()))
    eta = float(np.sqrt(eta1 ** 2 + eta2 ** 2 + eta3 ** 2))

    per_cell_sq = cell_term.copy()
    shared = face_term + edge_term
    c1 = mesh.edge_cells[:, 0]
    c2 = mesh.edge_cells[:, 1]
    split = np.where(c2 >= 0, 0.5, 1.0)
    np.add.at(per_cell_sq, c1, split * shared)
    two = c2 >= 0
    np.add.at(per_cell_sq, c2[two], 0.5 * shared[two])

    energy_error = None
    if with_energy_error and p.exact is not None:
        energy_error = float(np.sqrt(energy_error_sq(mesh, p, u_h)))
    return EstimatorReport(eta=eta, eta1=eta1, eta2=eta2, eta3=eta3,
                           per_cell=np.sqrt(per_cell_sq),
                           energy_error=energy_error)


def efficiency_index(report: EstimatorReport,
                     energy_error: Optional[float] = None) -> float:
    """eta divided by the true energy-norm error."""
    err = energy_error if energy_error is not None else report.energy_error
    if err is None:
        raise ValueError("no energy error available")
    return report.eta / max(err, 1e-300)
