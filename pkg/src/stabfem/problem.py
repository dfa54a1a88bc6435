"""Problem definitions: coefficients, boundary data, exact solutions.

All coefficient callables are numpy-vectorized: they accept coordinate
arrays of a common shape and return arrays of that shape (the convection
field returns a pair of such arrays).  They must be pure; a ProblemSpec is
immutable and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mesh import DIRICHLET, Mesh
from .quadrature import physical_points, triangle_rule


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    epsilon: float
    b: Callable
    c: Callable
    f: Callable
    u_dirichlet: Callable
    g_neumann: Callable
    sigma: float
    boundary_classifier: Callable
    div_b: Optional[Callable] = None
    exact: Optional[tuple[Callable, Callable]] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("diffusion coefficient must be positive")
        if self.sigma < 0:
            raise ValueError("coercivity constant must be nonnegative")


@dataclass
class RunConfig:
    """Settings of one adaptive run."""

    problem: str = "known_boundary_layer"
    theta: float = 0.5
    eta_stop: float = 1e-3
    dof_stop: int = 100_000
    max_nonlinear_iters: int = 10_000
    nonlinear_tol_scale: float = 1e-8
    quad_degree: int = 4
    edge_quad_points: int = 4
    estimator_quad_degree: int = 0  # 0: same as quad_degree
    out_dir: str = "out"

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("marking threshold must be in (0, 1]")
        if self.eta_stop <= 0:
            raise ValueError("eta_stop must be positive")
        if self.dof_stop < 1:
            raise ValueError("dof_stop must be at least 1")
        if self.max_nonlinear_iters < 1:
            raise ValueError("max_nonlinear_iters must be at least 1")

    @property
    def estimator_degree(self) -> int:
        return self.estimator_quad_degree or self.quad_degree


# ----------------------------------------------------------------------
# built-in problems


def known_boundary_layer(epsilon: float = 1e-3) -> ProblemSpec:
    """Benchmark with an exponential layer at the right boundary.

    b = (2, 1), c = 1, homogeneous Dirichlet data on the whole boundary;
    the source term is the closed form of -eps*lap(u) + b.grad(u) + c*u
    for the exact solution
        u(x, y) = y(1-y) (x - (e^{(x-1)/eps} - e^{-1/eps}) / (1 - e^{-1/eps})).
    """
    eps = float(epsilon)
    # e^{-1/eps} underflows to 0 for small eps, which is harmless: the
    # exponent (x-1)/eps is <= 0 on the closed domain, so no overflow.
    q = math.exp(-1.0 / eps) if 1.0 / eps < 700 else 0.0
    denom = 1.0 - q

    def layer(x):
        return np.exp((x - 1.0) / eps)

    def vfun(x):
        return x - (layer(x) - q) / denom

    def exact_u(x, y):
        return y * (1.0 - y) * vfun(x)

    def exact_grad(x, y):
        w = y * (1.0 - y)
        dv = 1.0 - layer(x) / (eps * denom)
        return w * dv, (1.0 - 2.0 * y) * vfun(x)

    def rhs(x, y):
        w = y * (1.0 - y)
        dw = 1.0 - 2.0 * y
        e = layer(x)
        v = x - (e - q) / denom
        dv = 1.0 - e / (eps * denom)
        ddv = -e / (eps * eps * denom)
        # f = -eps*(w v'' - 2 v) + 2 w v' + w' v + w v
        return -eps * (w * ddv - 2.0 * v) + 2.0 * w * dv + dw * v + w * v

    return ProblemSpec(
        name="known_boundary_layer",
        epsilon=eps,
        b=lambda x, y: (np.full_like(np.asarray(x, dtype=float), 2.0),
                        np.ones_like(np.asarray(x, dtype=float))),
        c=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
        f=rhs,
        u_dirichlet=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        g_neumann=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        sigma=1.0,
        boundary_classifier=lambda x, y: DIRICHLET,
        div_b=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        exact=(exact_u, exact_grad),
    )


def dmp_test() -> ProblemSpec:
    """Extrema-preservation test: f = 0 and discontinuous {0,1} Dirichlet data.

    eps = 1e-5, b = (2, 1), c = 0 gives sigma = 0, so this problem is for
    bound checks of the discrete solution only; the error estimator
    rejects it.
    """
    def u_d(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.where((x < 1e-12) & (y > 0.3), 1.0, 0.0)

    return ProblemSpec(
        name="dmp_test",
        epsilon=1e-5,
        b=lambda x, y: (np.full_like(np.asarray(x, dtype=float), 2.0),
                        np.ones_like(np.asarray(x, dtype=float))),
        c=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        f=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        u_dirichlet=u_d,
        g_neumann=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        sigma=0.0,
        boundary_classifier=lambda x, y: DIRICHLET,
        div_b=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
    )


PROBLEMS: dict[str, Callable[[], ProblemSpec]] = {
    "known_boundary_layer": known_boundary_layer,
    "dmp_test": dmp_test,
}


def get_problem(name: str) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; available: {sorted(PROBLEMS)}"
        ) from None
    return factory()


# ----------------------------------------------------------------------


def verify_coercivity(p: ProblemSpec, mesh: Mesh, quad_degree: int = 4) -> bool:
    """Check c - div(b)/2 >= sigma at every cell quadrature point."""
    lam, _ = triangle_rule(quad_degree)
    pts = physical_points(lam, mesh.cell_coords)
    x, y = pts[..., 0], pts[..., 1]
    if p.div_b is not None:
        div = p.div_b(x, y)
    else:
        h = 1e-6
        bx_p = p.b(x + h, y)[0]
        bx_m = p.b(x - h, y)[0]
        by_p = p.b(x, y + h)[1]
        by_m = p.b(x, y - h)[1]
        div = (bx_p - bx_m + by_p - by_m) / (2.0 * h)
    margin = p.c(x, y) - 0.5 * div - p.sigma
    return bool(np.min(margin) >= -1e-12)
