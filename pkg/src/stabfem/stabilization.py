"""Solution-dependent limiters and the nonlinear stabilization matrix B(u).

The limiter family is pluggable: a limiter object binds to a (matrix,
mesh) pair and then maps nodal vectors to limiter values alpha in [0, 1]
on the matrix pattern.  The default is the symmetric monotone upwind-type
limiter; alpha identically one recovers the plain Galerkin scheme.

Convention: d_ij = max{a_ij, 0, a_ji}, the standard artificial-diffusion
coefficient.  The upwind value u_ij falls back to u_i when the ray from
x_j through x_i leaves the domain at a boundary vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .sparse import SparseMatrix


@dataclass
class LimiterState:
    """Per-node accumulators and per-slot limiter values of one evaluation."""

    p_plus: np.ndarray
    p_minus: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    alpha: np.ndarray  # on the pattern of A, 1.0 on the diagonal


class UpwindGeometry:
    """Upwind cells K_i^j for every off-diagonal pattern pair (i, j).

    K_i^j is the cell incident to x_i whose closed angular sector at x_i
    contains the direction x_i - x_j; ties are broken by the smallest cell
    id, and -1 marks pairs whose ray leaves the domain.
    """

    def __init__(self, a: SparseMatrix, mesh: Mesh):
        if a.n != mesh.num_vertices:
            raise ValueError("matrix dimension does not match the mesh")
        rows = np.repeat(np.arange(a.n), np.diff(a.row_ptr))
        self.offdiag = np.nonzero(rows != a.col_idx)[0]
        self.rows = rows[self.offdiag]
        self.cols = a.col_idx[self.offdiag]
        self.transpose = a.transpose_permutation()

        offs, vc = mesh.vertex_cells
        deg = offs[1:] - offs[:-1]
        dmax = int(deg.max())
        pr, pc = self.rows, self.cols
        npairs = len(pr)

        cand = np.full((npairs, dmax), -1, dtype=np.int64)
        span = np.arange(dmax)
        valid = span[None, :] < deg[pr, None]
        take = offs[pr, None] + span[None, :]
        cand[valid] = vc[np.where(valid, take, 0)[valid]]

        cv = np.where(cand[..., None] >= 0, mesh.cells[cand], -1)
        pos = np.argmax(cv == pr[:, None, None], axis=2)
        vert_a = np.take_along_axis(cv, ((pos + 1) % 3)[..., None], axis=2)[..., 0]
        vert_b = np.take_along_axis(cv, ((pos + 2) % 3)[..., None], axis=2)[..., 0]

        xi = mesh.coords[pr]
        d = xi - mesh.coords[pc]
        va = mesh.coords[np.maximum(vert_a, 0)] - xi[:, None, :]
        vb = mesh.coords[np.maximum(vert_b, 0)] - xi[:, None, :]
        cross_ad = va[..., 0] * d[:, None, 1] - va[..., 1] * d[:, None, 0]
        cross_db = d[:, None, 0] * vb[..., 1] - d[:, None, 1] * vb[..., 0]
        scale = (np.hypot(va[..., 0], va[..., 1]) + np.hypot(vb[..., 0], vb[..., 1])) \
            * np.hypot(d[:, 0], d[:, 1])[:, None]
        tol = 1e-13 * scale
        inside = valid & (cross_ad >= -tol) & (cross_db >= -tol)

        pick = np.where(inside, cand, np.iinfo(np.int64).max)
        best = pick.min(axis=1)
        self.upwind_cell = np.where(best == np.iinfo(np.int64).max, -1, best)
        self.direction = d


def upwind_value(mesh: Mesh, u: np.ndarray, grads: np.ndarray, i: int, j: int) -> float:
    """u_ij = u_i + grad(u_h)|_{K_i^j} . (x_i - x_j) for a single pair."""
    xi = mesh.coords[i]
    d = xi - mesh.coords[j]
    offs, vc = mesh.vertex_cells
    best = -1
    for c in vc[offs[i]: offs[i + 1]]:
        verts = list(mesh.cells[c])
        k = verts.index(i)
        va = mesh.coords[verts[(k + 1) % 3]] - xi
        vb = mesh.coords[verts[(k + 2) % 3]] - xi
        scale = (np.hypot(*va) + np.hypot(*vb)) * np.hypot(*d)
        tol = 1e-13 * scale
        if (va[0] * d[1] - va[1] * d[0] >= -tol
                and d[0] * vb[1] - d[1] * vb[0] >= -tol):
            if best < 0 or c < best:
                best = int(c)
    if best < 0:
        return float(u[i])
    return float(u[i] + grads[best] @ d)


def compute_limiters(a: SparseMatrix, mesh: Mesh, u: np.ndarray,
                     dirichlet: np.ndarray,
                     geometry: UpwindGeometry | None = None) -> LimiterState:
    """Limiter steps: node sums P, Q, ratios R, and per-pair alpha.

    P_i+- sums |d_ij| {(u_i-u_j)^+- + (u_i-u_ij)^+-} over the stiffness
    pattern row; Q_i+- the mirrored sums with s_ij = max{|a_ij|, a_ji};
    R_i+- = min{1, Q_i+-/P_i+-} with R = 1 at Dirichlet nodes and where
    P vanishes; alpha_ij switches between R_i+ and R_i- by sign(u_i-u_j).
    """
    geo = geometry or UpwindGeometry(a, mesh)
    n = a.n
    pr, pc = geo.rows, geo.cols

    grads = mesh.cell_gradients(u)
    uij = np.where(
        geo.upwind_cell >= 0,
        u[pr] + np.einsum("pi,pi->p", grads[np.maximum(geo.upwind_cell, 0)],
                          geo.direction),
        u[pr],
    )

    aij = a.values[geo.offdiag]
    aji = a.values[geo.transpose[geo.offdiag]]
    dij = np.maximum(np.maximum(aij, 0.0), aji)
    sij = np.maximum(np.abs(aij), aji)

    du = u[pr] - u[pc]
    dw = u[pr] - uij
    pos = lambda z: np.maximum(z, 0.0)
    neg = lambda z: np.minimum(z, 0.0)

    p_plus = np.bincount(pr, weights=dij * (pos(du) + pos(dw)), minlength=n)
    p_minus = np.bincount(pr, weights=dij * (neg(du) + neg(dw)), minlength=n)
    q_plus = np.bincount(pr, weights=sij * (pos(-du) + pos(-dw)), minlength=n)
    q_minus = np.bincount(pr, weights=sij * (neg(-du) + neg(-dw)), minlength=n)

    with np.errstate(divide="ignore", invalid="ignore"):
        r_plus = np.where(p_plus != 0.0, np.minimum(1.0, q_plus / p_plus), 1.0)
        r_minus = np.where(p_minus != 0.0, np.minimum(1.0, q_minus / p_minus), 1.0)
    r_plus[dirichlet] = 1.0
    r_minus[dirichlet] = 1.0

    alpha = np.ones(a.nnz)
    alpha[geo.offdiag] = np.where(
        du > 0.0, r_plus[pr], np.where(du < 0.0, r_minus[pr], 1.0)
    )
    return LimiterState(p_plus, p_minus, q_plus, q_minus, r_plus, r_minus, alpha)


def build_stabilization(a: SparseMatrix, alpha: np.ndarray,
                        geometry: UpwindGeometry | None = None) -> SparseMatrix:
    """B with b_ij = -max{(1-a_ij) a_ij, 0, (1-a_ji) a_ji} and zero row sums.

    `alpha` is a per-slot array on the pattern of `a` (a LimiterState's
    alpha field, or a scalar-like array such as all zeros for the full
    artificial-diffusion envelope).
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape == ():
        alpha = np.full(a.nnz, float(alpha))
    if alpha.shape != a.values.shape:
        raise ValueError("alpha does not live on the pattern of the matrix")
    geo = geometry
    if geo is None:
        rows = np.repeat(np.arange(a.n), np.diff(a.row_ptr))
        offdiag = np.nonzero(rows != a.col_idx)[0]
        tp = a.transpose_permutation()
    else:
        rows = None
        offdiag = geo.offdiag
        tp = geo.transpose

    vals = np.zeros(a.nnz)
    aij = a.values[offdiag]
    aji = a.values[tp[offdiag]]
    al_ij = alpha[offdiag]
    al_ji = alpha[tp[offdiag]]
    bij = -np.maximum(np.maximum((1.0 - al_ij) * aij, 0.0), (1.0 - al_ji) * aji)
    vals[offdiag] = bij

    pr = geo.rows if geo is not None else rows[offdiag]
    rowsum = np.bincount(pr, weights=bij, minlength=a.n)
    diag = a.diagonal_slots()
    vals[diag] = -rowsum
    return a.copy_with_values(vals)


def edge_coefficients(b: SparseMatrix, mesh: Mesh) -> np.ndarray:
    """b_E = b_ij for every mesh edge E = (i, j)."""
    n = b.n
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(b.row_ptr))
    keys = rows * n + b.col_idx
    want = mesh.edges[:, 0] * n + mesh.edges[:, 1]
    pos = np.searchsorted(keys, want)
    ok = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == want)
    if not ok.all():
        bad = mesh.edges[~ok][0]
        raise ValueError(f"mesh edge {tuple(bad)} missing from the matrix pattern")
    return b.values[pos]


# ----------------------------------------------------------------------
# pluggable limiter interface


class SmuasLimiter:
    """Symmetric monotone upwind-type limiter (the default scheme)."""

    name = "smuas"

    def bind(self, a: SparseMatrix, mesh: Mesh) -> "BoundSmuas":
        return BoundSmuas(a, mesh)


class BoundSmuas:
    def __init__(self, a: SparseMatrix, mesh: Mesh):
        self.a = a
        self.mesh = mesh
        self.geometry = UpwindGeometry(a, mesh)

    def state(self, u: np.ndarray, dirichlet: np.ndarray) -> LimiterState:
        return compute_limiters(self.a, self.mesh, u, dirichlet, self.geometry)

    def stabilization(self, u: np.ndarray, dirichlet: np.ndarray) -> SparseMatrix:
        st = self.state(u, dirichlet)
        return build_stabilization(self.a, st.alpha, self.geometry)

    def initial_term(self) -> SparseMatrix:
        """Full artificial-diffusion envelope B at alpha = 0."""
        return build_stabilization(self.a, np.zeros(self.a.nnz), self.geometry)


class GalerkinLimiter:
    """No stabilization: B(u) = 0, recovering the plain Galerkin scheme."""

    name = "galerkin"

    def bind(self, a: SparseMatrix, mesh: Mesh) -> "BoundGalerkin":
        return BoundGalerkin(a)


class BoundGalerkin:
    def __init__(self, a: SparseMatrix):
        self.a = a

    def stabilization(self, u, dirichlet) -> SparseMatrix:
        return self.a.copy_with_values(np.zeros(self.a.nnz))

    def initial_term(self) -> SparseMatrix:
        return self.a.copy_with_values(np.zeros(self.a.nnz))


LIMITERS = {"smuas": SmuasLimiter, "galerkin": GalerkinLimiter}
