import numpy as np
import pytest

import stabfem as sf
from stabfem.mesh import DIRICHLET, Mesh
from stabfem.sparse import SparseMatrix
from stabfem.stabilization import (UpwindGeometry, build_stabilization,
                                   compute_limiters, edge_coefficients,
                                   upwind_value)


def _patch_mesh():
    """Central node 4 surrounded by four corners, four cells."""
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0],
                       [0.5, 0.5]])
    cells = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return Mesh(coords, cells)


def _random_refined_mesh(seed, rounds=2):
    rng = np.random.default_rng(seed)
    m = sf.uniform_refine(sf.initial_unit_square())
    for _ in range(rounds):
        marked = set(rng.choice(m.num_cells, size=max(1, m.num_cells // 3),
                                replace=False).tolist())
        m = sf.red_green_refine(m, marked)
    return m


def _adjacency_matrix(mesh, rng=None):
    n = mesh.num_vertices
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
    for i, j in mesh.edges:
        for r, c in ((i, j), (j, i)):
            rows.append(r)
            cols.append(c)
            vals.append(rng.normal() if rng is not None else 1.0)
    return SparseMatrix.from_coo(n, rows, cols, vals)


# ----------------------------------------------------------------------
# upwind values


def test_upwind_value_linear_field():
    mesh = _patch_mesh()
    g = np.array([0.4, -1.1])
    u = mesh.coords @ g
    grads = mesh.cell_gradients(u)
    for j in range(4):
        expect = u[4] + g @ (mesh.coords[4] - mesh.coords[j])
        assert upwind_value(mesh, u, grads, 4, j) == pytest.approx(expect, abs=1e-14)


def test_upwind_value_constant_field():
    mesh = _patch_mesh()
    u = np.full(5, 3.25)
    grads = mesh.cell_gradients(u)
    for i in range(5):
        for j in range(5):
            if i != j:
                assert upwind_value(mesh, u, grads, i, j) == 3.25


def test_upwind_value_boundary_fallback():
    # ray from the centre through a corner exits the domain
    mesh = _patch_mesh()
    u = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    grads = mesh.cell_gradients(u)
    assert upwind_value(mesh, u, grads, 0, 4) == u[0]


def _sector_oracle(mesh, u, grads, i, j):
    """Exhaustive sector test over every incident cell, smallest id wins."""
    xi = mesh.coords[i]
    d = xi - mesh.coords[j]
    hits = []
    offs, vc = mesh.vertex_cells
    for c in sorted(vc[offs[i]: offs[i + 1]].tolist()):
        verts = mesh.cells[c].tolist()
        k = verts.index(i)
        a = mesh.coords[verts[(k + 1) % 3]] - xi
        b = mesh.coords[verts[(k + 2) % 3]] - xi
        tol = 1e-13 * (np.hypot(*a) + np.hypot(*b)) * np.hypot(*d)
        if a[0] * d[1] - a[1] * d[0] >= -tol and d[0] * b[1] - d[1] * b[0] >= -tol:
            hits.append(c)
    if not hits:
        return float(u[i])
    return float(u[i] + grads[min(hits)] @ d)


def test_upwind_value_against_sector_oracle():
    rng = np.random.default_rng(8)
    mesh = _patch_mesh()
    for _ in range(25):
        u = rng.normal(size=5)
        grads = mesh.cell_gradients(u)
        for i in range(5):
            for j in range(5):
                if i == j:
                    continue
                assert upwind_value(mesh, u, grads, i, j) == pytest.approx(
                    _sector_oracle(mesh, u, grads, i, j), abs=1e-14)


def test_vectorized_upwind_matches_scalar():
    mesh = _random_refined_mesh(10)
    a = _adjacency_matrix(mesh)
    geo = UpwindGeometry(a, mesh)
    rng = np.random.default_rng(11)
    u = rng.normal(size=mesh.num_vertices)
    grads = mesh.cell_gradients(u)
    uij = np.where(
        geo.upwind_cell >= 0,
        u[geo.rows] + np.einsum(
            "pi,pi->p", grads[np.maximum(geo.upwind_cell, 0)], geo.direction),
        u[geo.rows])
    for k in range(len(geo.rows)):
        expect = upwind_value(mesh, u, grads, int(geo.rows[k]), int(geo.cols[k]))
        assert uij[k] == pytest.approx(expect, abs=1e-13)


# ----------------------------------------------------------------------
# limiters


def _limiter_oracle(a, mesh, u, dirichlet):
    """Brute-force reimplementation with dictionaries and plain loops."""
    n = a.n
    dense = a.dense()
    grads = mesh.cell_gradients(u)
    rp = np.ones(n)
    rm = np.ones(n)
    for i in range(n):
        pp = pm = qp = qm = 0.0
        for j in range(n):
            if j == i or a.slot(i, j) < 0:
                continue
            aij, aji = dense[i, j], dense[j, i]
            dij = max(aij, 0.0, aji)
            sij = max(abs(aij), aji)
            w = _sector_oracle(mesh, u, grads, i, j)
            pp += dij * (max(u[i] - u[j], 0.0) + max(u[i] - w, 0.0))
            pm += dij * (min(u[i] - u[j], 0.0) + min(u[i] - w, 0.0))
            qp += sij * (max(u[j] - u[i], 0.0) + max(w - u[i], 0.0))
            qm += sij * (min(u[j] - u[i], 0.0) + min(w - u[i], 0.0))
        if not dirichlet[i]:
            rp[i] = 1.0 if pp == 0.0 else min(1.0, qp / pp)
            rm[i] = 1.0 if pm == 0.0 else min(1.0, qm / pm)
    alpha = {}
    for i in range(n):
        for j in range(n):
            if j != i and a.slot(i, j) >= 0:
                if u[i] > u[j]:
                    alpha[i, j] = rp[i]
                elif u[i] < u[j]:
                    alpha[i, j] = rm[i]
                else:
                    alpha[i, j] = 1.0
    return rp, rm, alpha


def test_constant_field_gives_unit_limiters():
    mesh = _random_refined_mesh(12)
    a = _adjacency_matrix(mesh, np.random.default_rng(0))
    u = np.full(mesh.num_vertices, 7.0)
    ls = compute_limiters(a, mesh, u, mesh.is_dirichlet)
    assert np.abs(ls.p_plus).max() == 0.0
    assert np.abs(ls.q_minus).max() == 0.0
    assert np.all(ls.r_plus == 1.0)
    assert np.all(ls.r_minus == 1.0)
    assert np.all(ls.alpha == 1.0)


def test_equal_values_give_alpha_one():
    mesh = _patch_mesh()
    a = _adjacency_matrix(mesh, np.random.default_rng(1))
    u = np.array([1.0, 1.0, 2.0, 3.0, 4.0])
    ls = compute_limiters(a, mesh, u, np.zeros(5, dtype=bool))
    assert ls.alpha[a.slot(0, 1)] == 1.0
    assert ls.alpha[a.slot(1, 0)] == 1.0


def test_affine_field_preserved_at_interior_nodes(benchmark):
    mesh = _random_refined_mesh(13, rounds=3)
    sys = sf.assemble(mesh, benchmark)
    u = mesh.coords @ np.array([0.8, -0.6]) + 0.3
    ls = compute_limiters(sys.A, mesh, u, mesh.is_dirichlet)
    interior = np.setdiff1d(np.arange(mesh.num_vertices), mesh.boundary_vertices)
    assert np.allclose(ls.r_plus[interior], 1.0)
    assert np.allclose(ls.r_minus[interior], 1.0)


def test_limiters_match_brute_force_oracle(benchmark):
    rng = np.random.default_rng(14)
    for seed in range(3):
        mesh = _random_refined_mesh(20 + seed)
        assert mesh.num_vertices <= 100
        sys = sf.assemble(mesh, benchmark)
        for _ in range(3):
            u = rng.normal(size=mesh.num_vertices)
            ls = compute_limiters(sys.A, mesh, u, mesh.is_dirichlet)
            rp, rm, alpha = _limiter_oracle(sys.A, mesh, u, mesh.is_dirichlet)
            assert np.abs(ls.r_plus - rp).max() <= 1e-13
            assert np.abs(ls.r_minus - rm).max() <= 1e-13
            for (i, j), val in alpha.items():
                assert abs(ls.alpha[sys.A.slot(i, j)] - val) <= 1e-13


def test_alpha_bounds():
    rng = np.random.default_rng(15)
    mesh = _random_refined_mesh(16)
    a = _adjacency_matrix(mesh, rng)
    for _ in range(10):
        u = rng.normal(size=mesh.num_vertices)
        ls = compute_limiters(a, mesh, u, mesh.is_dirichlet)
        assert ls.alpha.min() >= 0.0
        assert ls.alpha.max() <= 1.0


# ----------------------------------------------------------------------
# stabilization matrix


def test_alpha_one_gives_zero_matrix():
    mesh = _patch_mesh()
    a = _adjacency_matrix(mesh, np.random.default_rng(2))
    b = build_stabilization(a, np.ones(a.nnz))
    assert np.abs(b.values).max() == 0.0


def test_nonpositive_entries_give_zero():
    a = SparseMatrix.from_coo(2, [0, 0, 1, 1], [0, 1, 0, 1],
                              [1.0, -2.0, -3.0, 1.0])
    b = build_stabilization(a, np.zeros(a.nnz))
    assert np.abs(b.values).max() == 0.0


def test_two_node_hand_case():
    # alpha = 0, a_01 = 1, a_10 = -2: b_01 = -max{1, 0, -2} = -1
    a = SparseMatrix.from_coo(2, [0, 0, 1, 1], [0, 1, 0, 1],
                              [5.0, 1.0, -2.0, 5.0])
    b = build_stabilization(a, np.zeros(a.nnz))
    assert b.entry(0, 1) == -1.0
    assert b.entry(1, 0) == -1.0
    assert b.entry(0, 0) == 1.0
    assert b.entry(1, 1) == 1.0


def test_stabilization_matrix_properties(benchmark):
    rng = np.random.default_rng(17)
    mesh = _random_refined_mesh(18)
    sys = sf.assemble(mesh, benchmark)
    for _ in range(5):
        u = rng.normal(size=mesh.num_vertices)
        ls = compute_limiters(sys.A, mesh, u, mesh.is_dirichlet)
        b = build_stabilization(sys.A, ls.alpha)
        d = b.dense()
        assert np.abs(d - d.T).max() == 0.0
        off = d - np.diag(np.diag(d))
        assert off.max() <= 0.0
        assert np.abs(d.sum(axis=1)).max() <= 1e-13 * max(1.0, np.abs(d).max())
        # nonnegativity of the induced form and annihilation of constants
        v = rng.normal(size=mesh.num_vertices)
        assert v @ (d @ v) >= -1e-13
        assert np.abs(d @ np.ones(mesh.num_vertices)).max() <= 1e-13


# ----------------------------------------------------------------------
# edge coefficients


def test_edge_coefficients_zero_matrix():
    mesh = _patch_mesh()
    a = _adjacency_matrix(mesh)
    b = a.copy_with_values(np.zeros(a.nnz))
    assert np.abs(edge_coefficients(b, mesh)).max() == 0.0


def test_edge_form_identity(benchmark):
    # sum_ij b_ij v_j w_i = sum_E |b_E| (v_j - v_i)(w_j - w_i)
    rng = np.random.default_rng(19)
    mesh = _random_refined_mesh(21)
    sys = sf.assemble(mesh, benchmark)
    u = rng.normal(size=mesh.num_vertices)
    ls = compute_limiters(sys.A, mesh, u, mesh.is_dirichlet)
    b = build_stabilization(sys.A, ls.alpha)
    be = edge_coefficients(b, mesh)
    for _ in range(10):
        v = rng.normal(size=mesh.num_vertices)
        w = rng.normal(size=mesh.num_vertices)
        matrix_form = w @ b.matvec(v)
        dv = v[mesh.edges[:, 1]] - v[mesh.edges[:, 0]]
        dw = w[mesh.edges[:, 1]] - w[mesh.edges[:, 0]]
        edge_form = np.sum(np.abs(be) * dv * dw)
        assert matrix_form == pytest.approx(edge_form, rel=1e-12, abs=1e-12)


def test_single_edge_hand_expansion():
    # B with b_01 = -2 on a two-node pattern: for v = w = indicator of node 1
    # the bilinear form is b_11 = 2 and the edge form |b_E| (1-0)^2 = 2
    a = SparseMatrix.from_coo(2, [0, 0, 1, 1], [0, 1, 0, 1],
                              [0.0, 2.0, 2.0, 0.0])
    b = build_stabilization(a, np.zeros(a.nnz))
    assert b.entry(0, 1) == -2.0
    v = np.array([0.0, 1.0])
    assert v @ b.matvec(v) == pytest.approx(2.0)


def test_edge_coefficients_missing_pattern_entry():
    mesh = _patch_mesh()
    n = mesh.num_vertices
    diag = SparseMatrix.from_coo(n, range(n), range(n), np.ones(n))
    with pytest.raises(ValueError):
        edge_coefficients(diag, mesh)
