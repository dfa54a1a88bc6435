"""Quadrature rules on the reference triangle and the unit segment.

Triangle rules are returned in barycentric coordinates with weights
normalized to sum to 1, so that the integral over a physical cell K is
``area(K) * sum(w_q * f(x_q))``.  Low degrees use hardcoded symmetric
rules; higher degrees fall back to a symmetrized conical product Gauss
rule of sufficient order.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _perm3(group):
    """All distinct permutations of a barycentric triple."""
    seen = []
    for p in ((0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0), (1, 0, 2)):
        tri = tuple(group[i] for i in p)
        if not any(np.allclose(tri, s) for s in seen):
            seen.append(tri)
    return seen


# Symmetric rules: list of (barycentric triple, weight-per-point) orbits.
_TRI_RULES = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((0.0, 0.5, 0.5), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
}


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (lambdas, weights) exact for polynomials up to `degree`.

    `lambdas` has shape (nq, 3); weights sum to 1.
    """
    if degree < 1:
        raise ValueError(f"quadrature degree must be >= 1, got {degree}")
    if degree == 3:
        degree = 4
    if degree in _TRI_RULES:
        pts, wts = [], []
        for group, w in _TRI_RULES[degree]:
            for tri in _perm3(group):
                pts.append(tri)
                wts.append(w)
        lam = np.array(pts)
        w = np.array(wts)
        return lam, w / w.sum()
    n = (degree + 2) // 2
    return conical_rule(n, symmetrize=True)


@lru_cache(maxsize=None)
def conical_rule(n: int, symmetrize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Conical product Gauss rule with n*n points (3*n*n if symmetrized).

    Built from Gauss-Legendre x Gauss-Jacobi(1,0) on the Duffy square;
    exact for total degree 2n-1.  The raw rule clusters points toward one
    vertex, so by default it is averaged over the three vertex rotations
    to remove the dependence on local vertex ordering.
    """
    xg, wg = np.polynomial.legendre.leggauss(n)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    xj, wj = roots_jacobi(n, 1, 0)
    xj = 0.5 * (xj + 1.0)
    wj = 0.25 * wj

    xi, eta = np.meshgrid(xg, xj, indexing="ij")
    w = np.outer(wg, wj)
    x = xi * (1.0 - eta)
    y = eta
    lam = np.column_stack([(1.0 - x - y).ravel(), x.ravel(), y.ravel()])
    w = 2.0 * w.ravel()  # normalize: conical weights sum to 1/2 (ref area)

    if symmetrize:
        lam = np.vstack([lam, lam[:, [1, 2, 0]], lam[:, [2, 0, 1]]])
        w = np.concatenate([w, w, w]) / 3.0
    return lam, w


@lru_cache(maxsize=None)
def segment_rule(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0,1]; weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


def physical_points(lam: np.ndarray, tri_coords: np.ndarray) -> np.ndarray:
    """Map barycentric points to physical coordinates.

    tri_coords: (ncells, 3, 2); returns (ncells, nq, 2).
    """
    return np.einsum("qk,cki->cqi", lam, tri_coords)
