"""P1 finite element assembly and energy-norm evaluation.

Row convention: A[i][j] = a(phi_j, phi_i), i.e. row i is the equation
tested with phi_i.  The un-eliminated matrix A keeps its full symmetric
pattern (Dirichlet rows included) because the limiter consumes raw a_ij;
boundary conditions are imposed on a copy by row replacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DIRICHLET, NEUMANN, Mesh
from .problem import ProblemSpec, verify_coercivity
from .quadrature import physical_points, segment_rule, triangle_rule
from .sparse import SparseMatrix


class CoercivityError(Exception):
    """The problem coefficients violate c - div(b)/2 >= sigma on this mesh."""


@dataclass
class AssembledSystem:
    A: SparseMatrix
    F: np.ndarray
    A_bc: SparseMatrix
    F_bc: np.ndarray
    dirichlet: np.ndarray       # boolean mask over vertices
    dirichlet_values: np.ndarray


def assemble(mesh: Mesh, p: ProblemSpec, quad_degree: int = 4,
             edge_quad_points: int = 4) -> AssembledSystem:
    """Assemble the stiffness matrix and load vector of the weak form.

    A[i][j] = eps*(grad phi_j, grad phi_i) + (b.grad phi_j, phi_i)
              + (c phi_j, phi_i),
    F[i] = (f, phi_i) + <g, phi_i> over the Neumann boundary.
    """
    if not verify_coercivity(p, mesh, quad_degree):
        raise CoercivityError(
            f"c - div(b)/2 >= {p.sigma} fails at a quadrature point"
        )

    lam, w = triangle_rule(quad_degree)
    pts = physical_points(lam, mesh.cell_coords)     # (M, nq, 2)
    x, y = pts[..., 0], pts[..., 1]
    bx, by = p.b(x, y)
    cv = p.c(x, y)
    fv = p.f(x, y)
    g = mesh.grad_basis                              # (M, 3, 2)
    area = mesh.areas

    # diffusion: constant gradients, rule weights sum to 1
    loc = p.epsilon * np.einsum("c,cik,cjk->cij", area, g, g)
    # convection: (b . grad phi_j) phi_i
    bdotg = np.einsum("cqk,cjk->cqj", np.stack([bx, by], axis=-1), g)
    loc += np.einsum("c,q,qi,cqj->cij", area, w, lam, bdotg)
    # reaction
    loc += np.einsum("c,cq,q,qi,qj->cij", area, cv, w, lam, lam)

    n = mesh.num_vertices
    cells = mesh.cells
    rows = np.repeat(cells, 3, axis=1).ravel()
    cols = np.tile(cells, (1, 3)).ravel()
    a = SparseMatrix.from_coo(n, rows, cols, loc.ravel())

    f_loc = np.einsum("c,cq,q,qi->ci", area, fv, w, lam)
    rhs = np.bincount(cells.ravel(), weights=f_loc.ravel(), minlength=n).astype(float)

    neumann = np.nonzero(mesh.edge_tag == NEUMANN)[0]
    if len(neumann):
        t, wt = segment_rule(edge_quad_points)
        p0 = mesh.coords[mesh.edges[neumann, 0]]
        p1 = mesh.coords[mesh.edges[neumann, 1]]
        qx = np.outer(1 - t, p0[:, 0]).T + np.outer(t, p1[:, 0]).T
        qy = np.outer(1 - t, p0[:, 1]).T + np.outer(t, p1[:, 1]).T
        gv = p.g_neumann(qx, qy)                     # (ne, nq)
        h = mesh.edge_lengths[neumann]
        f0 = h * np.einsum("eq,q,q->e", gv, wt, 1 - t)
        f1 = h * np.einsum("eq,q,q->e", gv, wt, t)
        np.add.at(rhs, mesh.edges[neumann, 0], f0)
        np.add.at(rhs, mesh.edges[neumann, 1], f1)

    # Dirichlet rows replaced by identity rows on a copy
    mask = mesh.is_dirichlet
    vals_bc = a.values.copy()
    row_of = np.repeat(np.arange(n), np.diff(a.row_ptr))
    in_dir_row = mask[row_of]
    vals_bc[in_dir_row] = 0.0
    diag = a.diagonal_slots()
    vals_bc[diag[mask]] = 1.0
    a_bc = a.copy_with_values(vals_bc)

    ud = np.zeros(n)
    if mask.any():
        ud[mask] = p.u_dirichlet(mesh.coords[mask, 0], mesh.coords[mask, 1])
    rhs_bc = rhs.copy()
    rhs_bc[mask] = ud[mask]

    return AssembledSystem(A=a, F=rhs, A_bc=a_bc, F_bc=rhs_bc,
                           dirichlet=mask, dirichlet_values=ud)


# ----------------------------------------------------------------------
# energy norm


def _p1_mass_sq(mesh: Mesh, u: np.ndarray) -> float:
    """Exact integral of the square of a P1 function."""
    v = u[mesh.cells]
    s = v[:, 0] ** 2 + v[:, 1] ** 2 + v[:, 2] ** 2
    c = v[:, 0] * v[:, 1] + v[:, 1] * v[:, 2] + v[:, 2] * v[:, 0]
    return float(np.sum(mesh.areas / 6.0 * (s + c)))


def energy_norm_sq(mesh: Mesh, p: ProblemSpec, v, quad_degree: int = 5) -> float:
    """eps*||grad v||^2 + sigma*||v||^2 over the whole domain.

    `v` is either a nodal vector (piecewise P1) or a pair of callables
    (v, grad_v) with grad_v returning the two partial derivatives.
    """
    if isinstance(v, np.ndarray):
        grads = mesh.cell_gradients(v)
        h1 = float(np.sum(mesh.areas * np.einsum("ci,ci->c", grads, grads)))
        return p.epsilon * h1 + p.sigma * _p1_mass_sq(mesh, v)
    vf, gf = v
    lam, w = triangle_rule(quad_degree)
    pts = physical_points(lam, mesh.cell_coords)
    x, y = pts[..., 0], pts[..., 1]
    gx, gy = gf(x, y)
    vals = p.epsilon * (gx ** 2 + gy ** 2) + p.sigma * vf(x, y) ** 2
    return float(np.einsum("c,cq,q->", mesh.areas, vals, w))


def _tri_split(tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split triangles (T,3,2) into their four similar children (4T,3,2)."""
    p0, p1, p2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m01 = 0.5 * (p0 + p1)
    m12 = 0.5 * (p1 + p2)
    m20 = 0.5 * (p2 + p0)
    children = np.concatenate([
        np.stack([p0, m01, m20], axis=1),
        np.stack([m01, p1, m12], axis=1),
        np.stack([m20, m12, p2], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    owner = np.tile(np.arange(len(tris)), 4)
    return children, owner


def _batch_integral(integrand, tris: np.ndarray, owner: np.ndarray,
                    nowners: int, lam, w) -> np.ndarray:
    pts = physical_points(lam, tris)
    vals = integrand(pts[..., 0], pts[..., 1], owner)
    v1 = tris[:, 1] - tris[:, 0]
    v2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * np.abs(v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])
    per_tri = area * (vals @ w)
    return np.bincount(owner, weights=per_tri, minlength=nowners)


def energy_error_sq(mesh: Mesh, p: ProblemSpec, u_h: np.ndarray,
                    quad_degree: int = 5, rel_tol: float = 1e-4,
                    max_depth: int = 30) -> float:
    """||u - u_h||_a^2 against the problem's exact solution.

    Cells intersecting the layer strip x > 1 - 50*eps are integrated with
    recursive subdivision until their contribution changes by less than
    `rel_tol` relatively; the remaining cells use a single rule.
    """
    if p.exact is None:
        raise ValueError(f"problem {p.name!r} has no exact solution")
    uf, gf = p.exact
    grads = mesh.cell_gradients(u_h)
    base = u_h[mesh.cells[:, 0]]
    anchor = mesh.cell_coords[:, 0]

    def integrand(x, y, owner):
        ex, ey = gf(x, y)
        dx = ex - grads[owner, 0][:, None]
        dy = ey - grads[owner, 1][:, None]
        uh = (base[owner][:, None]
              + grads[owner, 0][:, None] * (x - anchor[owner, 0][:, None])
              + grads[owner, 1][:, None] * (y - anchor[owner, 1][:, None]))
        dv = uf(x, y) - uh
        return p.epsilon * (dx ** 2 + dy ** 2) + p.sigma * dv ** 2

    lam, w = triangle_rule(quad_degree)
    strip_lo = 1.0 - 50.0 * p.epsilon
    in_strip = mesh.cell_coords[..., 0].max(axis=1) > strip_lo
    total = 0.0

    smooth = np.nonzero(~in_strip)[0]
    if len(smooth):
        total += _batch_integral(
            lambda x, y, o: integrand(x, y, smooth[o]),
            mesh.cell_coords[smooth], np.arange(len(smooth)),
            len(smooth), lam, w
        ).sum()

    layer = np.nonzero(in_strip)[0]
    if len(layer):
        tris = mesh.cell_coords[layer]
        owner = np.arange(len(layer))        # index into `layer`
        cell_of = layer.copy()               # owner -> global cell id
        prev = _batch_integral(
            lambda x, y, o: integrand(x, y, cell_of[o]),
            tris, owner, len(layer), lam, w)
        active = np.ones(len(layer), dtype=bool)
        for _ in range(max_depth):
            tris, sub_owner = _tri_split(tris)
            owner = np.tile(owner, 4)
            cur = _batch_integral(
                lambda x, y, o: integrand(x, y, cell_of[o]),
                tris, owner, len(layer), lam, w)
            change = np.abs(cur - prev)
            done = active & (change <= rel_tol * np.maximum(np.abs(cur), 1e-300))
            total += cur[done].sum()
            active &= ~done
            if not active.any():
                break
            keep = active[owner]
            tris = tris[keep]
            owner = owner[keep]
            prev = cur
        else:
            total += cur[active].sum()
    return float(total)
