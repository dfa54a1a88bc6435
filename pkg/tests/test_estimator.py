import numpy as np
import pytest

import stabfem as sf
from stabfem.estimator import (EstimatorConfig, compute_eta, efficiency_index,
                               element_residuals, face_residuals)
from stabfem.mesh import DIRICHLET, Mesh
from stabfem.problem import ProblemSpec
from stabfem.quadrature import segment_rule
from stabfem.sparse import SparseMatrix
from stabfem.stabilization import SmuasLimiter


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def _one(x, y):
    return np.ones_like(np.asarray(x, dtype=float))


def _spec(**kw):
    base = dict(name="custom", epsilon=1.0,
                b=lambda x, y: (_zero(x, y), _zero(x, y)),
                c=_zero, f=_zero, u_dirichlet=_zero, g_neumann=_zero,
                sigma=1.0, boundary_classifier=lambda x, y: DIRICHLET,
                div_b=_zero)
    base.update(kw)
    return ProblemSpec(**base)


def _zero_b(n, mesh):
    rows = list(range(n)) + mesh.edges[:, 0].tolist() + mesh.edges[:, 1].tolist()
    cols = list(range(n)) + mesh.edges[:, 1].tolist() + mesh.edges[:, 0].tolist()
    return SparseMatrix.from_coo(n, rows, cols, np.zeros(len(rows)))


def test_element_residual_vanishes_for_manufactured_source():
    # f chosen as b.grad(u_h) + c u_h of the P1 field u_h = 2x + y
    p = _spec(b=lambda x, y: (_one(x, y), 2 * _one(x, y)), c=_one,
              f=lambda x, y: 4.0 + 2 * x + y)
    mesh = sf.uniform_refine(sf.initial_unit_square())
    u = 2 * mesh.coords[:, 0] + mesh.coords[:, 1]
    assert np.abs(element_residuals(mesh, p, u)).max() <= 1e-28


def test_element_residual_constant_source():
    p = _spec(f=_one)
    mesh = sf.uniform_refine(sf.initial_unit_square())
    rk = element_residuals(mesh, p, np.zeros(mesh.num_vertices))
    assert np.allclose(rk, mesh.areas, rtol=1e-13)


def test_element_residual_quadrature_consistency(benchmark):
    # away from the layer a refined rule must agree with the default one
    mesh = sf.initial_unit_square(benchmark.boundary_classifier)
    for _ in range(3):
        mesh = sf.uniform_refine(mesh)
    u = np.sin(mesh.coords[:, 0]) * mesh.coords[:, 1]
    r4 = element_residuals(mesh, benchmark, u, quad_degree=4)
    r12 = element_residuals(mesh, benchmark, u, quad_degree=12)
    away = mesh.cell_coords[..., 0].max(axis=1) < 0.9
    assert np.allclose(r4[away], r12[away], rtol=1e-3)


def test_face_residuals_linear_field():
    p = _spec()
    mesh = sf.uniform_refine(sf.uniform_refine(sf.initial_unit_square()))
    u = 3 * mesh.coords[:, 0] - 2 * mesh.coords[:, 1]
    rf = face_residuals(mesh, p, u)
    assert np.abs(rf).max() <= 1e-26


def test_face_residuals_dirichlet_edges_zero(benchmark):
    mesh = sf.uniform_refine(sf.initial_unit_square(benchmark.boundary_classifier))
    rng = np.random.default_rng(31)
    u = rng.normal(size=mesh.num_vertices)
    rf = face_residuals(mesh, benchmark, u)
    assert np.abs(rf[mesh.edge_tag == DIRICHLET]).max() == 0.0


def test_face_residual_hat_function_hand_value():
    # two-triangle square, hat at (0,0): cell gradients (-1,0) and (0,-1),
    # jump across the diagonal is -sqrt(2), so ||R_F||^2 = eps^2*2*sqrt(2)
    p = _spec()
    mesh = sf.initial_unit_square()
    u = np.array([1.0, 0.0, 0.0, 0.0])
    rf = face_residuals(mesh, p, u)
    diag = mesh.edge_index(0, 2)
    assert rf[diag] == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-14)
    assert np.abs(np.delete(rf, diag)).max() == 0.0


def test_face_residual_neumann_mismatch():
    def classify(x, y):
        return 2 if np.isclose(x, 1.0) else 1

    p = _spec(boundary_classifier=classify, g_neumann=_one)
    mesh = sf.uniform_refine(sf.initial_unit_square(classify))
    u = np.zeros(mesh.num_vertices)  # flux 0, g = 1 -> ||R_F||^2 = h_F
    rf = face_residuals(mesh, p, u)
    neumann = mesh.edge_tag == 2
    assert np.allclose(rf[neumann], mesh.edge_lengths[neumann], rtol=1e-13)


def test_eta_zero_for_affine_solution_with_manufactured_source():
    p = _spec(b=lambda x, y: (_one(x, y), _one(x, y)), c=_one,
              f=lambda x, y: 1.0 + 1.0 + (x + y), epsilon=1e-3)
    mesh = sf.uniform_refine(sf.uniform_refine(sf.initial_unit_square()))
    u = mesh.coords[:, 0] + mesh.coords[:, 1]
    sys = sf.assemble(mesh, p)
    bound = SmuasLimiter().bind(sys.A, mesh)
    b = bound.stabilization(u, sys.dirichlet)
    report = compute_eta(mesh, p, u, b, with_energy_error=False)
    assert report.eta <= 1e-12


def test_eta3_single_edge_formula():
    # b_E = -1, h_E = 0.5, du = 0.2, eps = 1e-3, sigma = 1:
    # min{4*0.25/1e-3, 4} * 1 * (0.2)^2 / 0.5^2 = 4 * 0.16 = 0.64
    coords = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    mesh = Mesh(coords, np.array([[0, 1, 2]]))
    p = _spec(epsilon=1e-3)
    u = np.array([0.0, 0.2, 0.0])
    b = _zero_b(3, mesh)
    vals = b.values.copy()
    vals[b.slot(0, 1)] = -1.0
    vals[b.slot(1, 0)] = -1.0
    vals[b.slot(0, 0)] = 1.0
    vals[b.slot(1, 1)] = 1.0
    b = b.copy_with_values(vals)
    report = compute_eta(mesh, p, u, b, with_energy_error=False)
    assert report.eta3 ** 2 == pytest.approx(0.64, rel=1e-12)


def test_eta3_zero_when_stabilization_vanishes(benchmark):
    mesh = sf.uniform_refine(sf.initial_unit_square(benchmark.boundary_classifier))
    rng = np.random.default_rng(33)
    u = rng.normal(size=mesh.num_vertices)
    b = _zero_b(mesh.num_vertices, mesh)
    report = compute_eta(mesh, benchmark, u, b, with_energy_error=False)
    assert report.eta3 == 0.0


def test_report_self_consistency(solved_uniform):
    mesh, sys, u, stats, b = solved_uniform[81]
    p = sf.get_problem("known_boundary_layer")
    report = compute_eta(mesh, p, u, b)
    total = report.eta1 ** 2 + report.eta2 ** 2 + report.eta3 ** 2
    assert report.eta ** 2 == pytest.approx(total, rel=1e-12)
    assert np.sum(report.per_cell ** 2) == pytest.approx(report.eta ** 2, rel=1e-12)


def test_tangential_norm_identity():
    # ||grad u_h . t_E||^2 over an edge equals (u_j - u_i)^2 / h_E: compare
    # the closed form against segment quadrature of the P1 restriction
    rng = np.random.default_rng(34)
    mesh = sf.uniform_refine(sf.initial_unit_square())
    u = rng.normal(size=mesh.num_vertices)
    grads = mesh.cell_gradients(u)
    t, w = segment_rule(4)
    for e in range(mesh.num_edges):
        i, j = mesh.edges[e]
        h = mesh.edge_lengths[e]
        tang = (mesh.coords[j] - mesh.coords[i]) / h
        cell = mesh.edge_cells[e, 0]
        const = grads[cell] @ tang
        quad = h * np.sum(w * const ** 2)
        closed = (u[j] - u[i]) ** 2 / h
        assert quad == pytest.approx(closed, rel=1e-13, abs=1e-16)


def test_uniform_scaling_on_smooth_problem():
    # manufactured smooth solution u = sin(pi x) sin(pi y): all estimator
    # pieces contract like h under uniform refinement
    def uf(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def rhs(x, y):
        return (2 * np.pi ** 2 + 1) * uf(x, y) + np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)

    p = _spec(epsilon=1.0, c=_one,
              b=lambda x, y: (_one(x, y), _zero(x, y)), f=rhs)
    mesh = sf.initial_unit_square()
    cfg = sf.RunConfig()
    etas = []
    for level in range(6):
        mesh = sf.uniform_refine(mesh)
        if level < 2:
            continue
        sys = sf.assemble(mesh, p)
        bound = SmuasLimiter().bind(sys.A, mesh)
        u, stats = sf.solve_nonlinear(sys, mesh, p, cfg,
                                      np.zeros(mesh.num_vertices), bound)
        assert stats.converged
        b = bound.stabilization(u, sys.dirichlet)
        etas.append(compute_eta(mesh, p, u, b, with_energy_error=False).eta)
    ratios = [b / a for a, b in zip(etas, etas[1:])]
    for r in ratios[-2:]:
        assert 0.5 * 0.8 <= r <= 0.5 * 1.2


def test_sigma_zero_rejected():
    p = sf.get_problem("dmp_test")
    mesh = sf.uniform_refine(sf.initial_unit_square(p.boundary_classifier))
    b = _zero_b(mesh.num_vertices, mesh)
    with pytest.raises(ValueError):
        compute_eta(mesh, p, np.zeros(mesh.num_vertices), b)


def test_efficiency_index():
    report = sf.EstimatorReport(eta=2.0, eta1=2.0, eta2=0.0, eta3=0.0,
                                per_cell=np.array([2.0]), energy_error=2.0)
    assert efficiency_index(report) == 1.0
    assert efficiency_index(report, energy_error=1.0) == 2.0
    report.energy_error = None
    with pytest.raises(ValueError):
        efficiency_index(report)


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(cy_factor=0.0)
