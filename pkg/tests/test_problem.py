import numpy as np
import pytest

import stabfem as sf
from stabfem.mesh import DIRICHLET
from stabfem.problem import ProblemSpec, RunConfig, dmp_test, get_problem


def test_exact_vanishes_on_right_boundary(benchmark):
    u, _ = benchmark.exact
    y = np.linspace(0, 1, 101)
    assert np.abs(u(np.ones_like(y), y)).max() < 1e-14


def test_exact_midpoint_value(benchmark):
    # y(1-y)(x - e^{(x-1)/eps}) at (0.5, 0.5): the exponential is ~e^{-500}
    u, _ = benchmark.exact
    assert u(0.5, 0.5) == pytest.approx(0.125, abs=1e-15)


def test_exact_vanishes_on_whole_boundary(benchmark):
    u, _ = benchmark.exact
    t = np.linspace(0, 1, 250)
    for x, y in [(t, np.zeros_like(t)), (t, np.ones_like(t)),
                 (np.zeros_like(t), t), (np.ones_like(t), t)]:
        assert np.abs(u(x, y)).max() < 1e-12


def _fd_operator(p, x, y, h=1e-5):
    """Central-difference oracle for -eps*lap(u) + b.grad(u) + c*u."""
    u, _ = p.exact
    lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h)
           - 4 * u(x, y)) / h**2
    ux = (u(x + h, y) - u(x - h, y)) / (2 * h)
    uy = (u(x, y + h) - u(x, y - h)) / (2 * h)
    bx, by = p.b(x, y)
    return -p.epsilon * lap + bx * ux + by * uy + p.c(x, y) * u(x, y)


def test_source_term_matches_finite_difference_oracle(benchmark):
    rng = np.random.default_rng(4)
    x = rng.uniform(0.05, 0.9, size=100)   # away from the layer
    y = rng.uniform(0.05, 0.95, size=100)
    f_closed = benchmark.f(x, y)
    f_fd = _fd_operator(benchmark, x, y)
    assert np.abs(f_closed - f_fd).max() <= 1e-6 * np.abs(f_fd).max()


def test_exact_gradient_matches_finite_differences(benchmark):
    u, grad = benchmark.exact
    rng = np.random.default_rng(5)
    x = rng.uniform(0.05, 0.9, size=50)
    y = rng.uniform(0.05, 0.95, size=50)
    gx, gy = grad(x, y)
    h = 1e-6
    assert np.allclose(gx, (u(x + h, y) - u(x - h, y)) / (2 * h), atol=1e-6)
    assert np.allclose(gy, (u(x, y + h) - u(x, y - h)) / (2 * h), atol=1e-6)


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def test_verify_coercivity_benchmark(benchmark):
    mesh = sf.uniform_refine(sf.initial_unit_square(benchmark.boundary_classifier))
    assert sf.verify_coercivity(benchmark, mesh)


def test_verify_coercivity_violated():
    p = ProblemSpec(name="bad", epsilon=1.0,
                    b=lambda x, y: (_zero(x, y), _zero(x, y)),
                    c=_zero, f=_zero, u_dirichlet=_zero, g_neumann=_zero,
                    sigma=1.0, boundary_classifier=lambda x, y: DIRICHLET)
    mesh = sf.initial_unit_square()
    assert not sf.verify_coercivity(p, mesh)


def test_verify_coercivity_divergence_free_rotation():
    # b = (y, x) has zero divergence, so c = 1 keeps sigma = 1
    p = ProblemSpec(name="rot", epsilon=1.0,
                    b=lambda x, y: (np.asarray(y, dtype=float),
                                    np.asarray(x, dtype=float)),
                    c=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
                    f=_zero, u_dirichlet=_zero, g_neumann=_zero,
                    sigma=1.0, boundary_classifier=lambda x, y: DIRICHLET)
    mesh = sf.uniform_refine(sf.initial_unit_square())
    assert sf.verify_coercivity(p, mesh)  # uses central differences for div b


def test_dmp_problem_data():
    p = dmp_test()
    assert p.sigma == 0.0
    assert p.epsilon == 1e-5
    ud = p.u_dirichlet(np.array([0.0, 0.0, 0.5]), np.array([0.9, 0.1, 0.9]))
    assert ud.tolist() == [1.0, 0.0, 0.0]


def test_registry():
    assert get_problem("known_boundary_layer").name == "known_boundary_layer"
    with pytest.raises(KeyError):
        get_problem("no_such_problem")


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(theta=0.0)
    with pytest.raises(ValueError):
        RunConfig(eta_stop=0.0)
    with pytest.raises(ValueError):
        RunConfig(dof_stop=0)
    assert RunConfig().estimator_degree == RunConfig().quad_degree
