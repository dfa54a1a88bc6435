"""Conforming triangular meshes with uniform and red-green refinement.

A mesh is immutable after construction; refinement returns a new mesh.
Vertex ids of an input mesh are preserved by refinement (new vertices are
appended), which solution transfer between meshes relies on.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable, Optional

import numpy as np

# edge tags
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

# cell kinds
REGULAR = 0
GREEN = 1

BoundaryClassifier = Callable[[float, float], int]


def _key(p: int, q: int) -> tuple[int, int]:
    return (p, q) if p < q else (q, p)


def all_dirichlet(x: float, y: float) -> int:
    """Default boundary classifier: the whole boundary is Dirichlet."""
    return DIRICHLET


class Mesh:
    """Conforming triangulation of a polygonal domain.

    Parameters
    ----------
    coords : (N, 2) float array of vertex coordinates.
    cells : (M, 3) int array of vertex ids, counter-clockwise.
    boundary_classifier : maps a boundary-edge midpoint to DIRICHLET or
        NEUMANN; defaults to all-Dirichlet.
    cell_kind, cell_parent, green_parents, new_vertex_edges, generation :
        refinement genealogy, filled in by the refinement routines.
    """

    def __init__(
        self,
        coords,
        cells,
        boundary_classifier: Optional[BoundaryClassifier] = None,
        cell_kind=None,
        cell_parent=None,
        green_parents: Optional[dict] = None,
        new_vertex_edges: Optional[dict] = None,
        generation: int = 0,
    ):
        self.coords = np.ascontiguousarray(coords, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError("coords must be (N, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must be (M, 3)")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("non-finite vertex coordinates")
        self.boundary_classifier = boundary_classifier or all_dirichlet
        m = len(self.cells)
        self.cell_kind = (
            np.zeros(m, dtype=np.uint8) if cell_kind is None
            else np.asarray(cell_kind, dtype=np.uint8)
        )
        self.cell_parent = (
            np.full(m, -1, dtype=np.int64) if cell_parent is None
            else np.asarray(cell_parent, dtype=np.int64)
        )
        self.green_parents = dict(green_parents or {})
        self.new_vertex_edges = dict(new_vertex_edges or {})
        self.generation = generation

        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("cells must be counter-clockwise with positive area")
        self._build_edges()
        for a in (self.coords, self.cells, self.cell_kind, self.cell_parent,
                  self.edges, self.edge_cells, self.edge_tag):
            a.setflags(write=False)

    # ------------------------------------------------------------------
    # construction helpers

    def _build_edges(self):
        edge_ids: dict[tuple[int, int], int] = {}
        edges = []
        edge_cells = []
        for c, (a, b, d) in enumerate(self.cells):
            for p, q in ((a, b), (b, d), (d, a)):
                k = _key(int(p), int(q))
                e = edge_ids.get(k)
                if e is None:
                    edge_ids[k] = len(edges)
                    edges.append(k)
                    edge_cells.append([c, -1])
                elif edge_cells[e][1] == -1:
                    edge_cells[e][1] = c
                else:
                    raise ValueError(f"edge {k} shared by more than two cells")
        self.edges = np.array(edges, dtype=np.int64)
        self.edge_cells = np.array(edge_cells, dtype=np.int64)
        self._edge_ids = edge_ids

        tags = np.full(len(edges), INTERIOR, dtype=np.uint8)
        boundary = self.edge_cells[:, 1] == -1
        mids = 0.5 * (self.coords[self.edges[:, 0]] + self.coords[self.edges[:, 1]])
        for e in np.nonzero(boundary)[0]:
            tag = self.boundary_classifier(mids[e, 0], mids[e, 1])
            if tag not in (DIRICHLET, NEUMANN):
                raise ValueError("boundary classifier must return DIRICHLET or NEUMANN")
            tags[e] = tag
        self.edge_tag = tags

    # ------------------------------------------------------------------
    # sizes and lookups

    @property
    def num_vertices(self) -> int:
        return len(self.coords)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, p: int, q: int) -> int:
        return self._edge_ids[_key(p, q)]

    @cached_property
    def dirichlet_vertices(self) -> np.ndarray:
        d = self.edges[self.edge_tag == DIRICHLET]
        return np.unique(d)

    @cached_property
    def is_dirichlet(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.dirichlet_vertices] = True
        return mask

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        b = self.edges[self.edge_tag != INTERIOR]
        return np.unique(b)

    # ------------------------------------------------------------------
    # geometry

    @cached_property
    def cell_coords(self) -> np.ndarray:
        """(M, 3, 2) vertex coordinates per cell."""
        return self.coords[self.cells]

    def signed_areas(self) -> np.ndarray:
        p = self.coords[self.cells]
        v1 = p[:, 1] - p[:, 0]
        v2 = p[:, 2] - p[:, 0]
        return 0.5 * (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return self.signed_areas()

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.coords[self.edges[:, 1]] - self.coords[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        p = self.cell_coords
        out = np.zeros(self.num_cells)
        for i, j in ((0, 1), (1, 2), (2, 0)):
            d = p[:, i] - p[:, j]
            np.maximum(out, np.hypot(d[:, 0], d[:, 1]), out=out)
        return out

    @cached_property
    def grad_basis(self) -> np.ndarray:
        """(M, 3, 2) gradients of the three P1 basis functions per cell."""
        p = self.cell_coords
        g = np.empty((self.num_cells, 3, 2))
        inv2a = 1.0 / (2.0 * self.areas)
        for k in range(3):
            e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
            g[:, k, 0] = -e[:, 1] * inv2a
            g[:, k, 1] = e[:, 0] * inv2a
        return g

    def cell_gradients(self, u: np.ndarray) -> np.ndarray:
        """(M, 2) gradient of the P1 interpolant of nodal values u."""
        return np.einsum("ck,cki->ci", u[self.cells], self.grad_basis)

    @cached_property
    def vertex_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR adjacency vertex -> incident cells: (offsets, cell ids)."""
        counts = np.bincount(self.cells.ravel(), minlength=self.num_vertices)
        offs = np.concatenate([[0], np.cumsum(counts)])
        out = np.empty(offs[-1], dtype=np.int64)
        cursor = offs[:-1].copy()
        for c in range(self.num_cells):
            for v in self.cells[c]:
                out[cursor[v]] = c
                cursor[v] += 1
        return offs, out

    def min_angle(self) -> float:
        p = self.cell_coords
        worst = np.pi
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("ci,ci->c", a, b) / (
                np.hypot(a[:, 0], a[:, 1]) * np.hypot(b[:, 0], b[:, 1])
            )
            worst = min(worst, np.arccos(np.clip(cosang, -1, 1)).min())
        return float(worst)


# ----------------------------------------------------------------------
# mesh generation and refinement


def initial_unit_square(boundary_classifier: Optional[BoundaryClassifier] = None) -> Mesh:
    """Unit square split into two triangles by the (0,0)-(1,1) diagonal."""
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    cells = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(coords, cells, boundary_classifier=boundary_classifier)


def red_green_refine(mesh: Mesh, marked) -> Mesh:
    """Red-refine the marked cells, restoring conformity by green closure.

    Green cells are never subdivided: a marked or affected green pair is
    first replaced by its (regular) parent, which is then refined.  Cells
    acquiring two or three split edges are promoted to red; exactly one
    split edge yields a green bisection.
    """
    marked = {int(c) for c in marked}
    if not marked <= set(range(mesh.num_cells)):
        raise ValueError("marked set contains unknown cell ids")
    if not marked:
        return mesh

    coords = [tuple(p) for p in mesh.coords]
    midpoint: dict[tuple[int, int], int] = {}
    new_vertex_edges: dict[int, tuple[int, int]] = {}

    def get_midpoint(p: int, q: int) -> int:
        k = _key(p, q)
        v = midpoint.get(k)
        if v is None:
            v = len(coords)
            coords.append((
                0.5 * (coords[p][0] + coords[q][0]),
                0.5 * (coords[p][1] + coords[q][1]),
            ))
            midpoint[k] = v
            new_vertex_edges[v] = k
        return v

    # Collapse green pairs to their parent triangle (stored as
    # (cut0, cut1, apex), counter-clockwise); the cut edge keeps its
    # existing midpoint so untouched pairs are re-created identically.
    items: list[tuple[tuple[int, int, int], int, bool]] = []  # (tri, origin, forced red)
    parent_item: dict[tuple[int, int, int], int] = {}
    cell_item: dict[int, int] = {}
    for c in range(mesh.num_cells):
        if mesh.cell_kind[c] == GREEN:
            tri = mesh.green_parents[c]
            idx = parent_item.get(tri)
            if idx is None:
                idx = len(items)
                parent_item[tri] = idx
                items.append((tri, c, False))
                mid = next(v for v in mesh.cells[c] if v not in tri)
                midpoint[_key(tri[0], tri[1])] = int(mid)
            cell_item[c] = idx
        else:
            cell_item[c] = len(items)
            items.append((tuple(int(v) for v in mesh.cells[c]), c, False))

    forced = [False] * len(items)
    for c in marked:
        forced[cell_item[c]] = True
    items = [(tri, origin, forced[i]) for i, (tri, origin, _) in enumerate(items)]

    def split_count(tri):
        a, b, c = tri
        return sum(_key(*e) in midpoint for e in ((a, b), (b, c), (c, a)))

    def green_blocked(tri):
        # the single cut edge whose halves already carry a midpoint
        a, b, c = tri
        for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
            m = midpoint.get(_key(p, q))
            if m is not None:
                return _key(p, m) in midpoint or _key(m, q) in midpoint
        return False

    # Promote to red until no triangle has >= 2 split edges (or a split
    # half-edge under a would-be green cut) left.
    while True:
        out = []
        any_red = False
        for tri, origin, force in items:
            n = split_count(tri)
            if force or n >= 2 or (n == 1 and green_blocked(tri)):
                any_red = True
                a, b, c = tri
                mab, mbc, mca = get_midpoint(a, b), get_midpoint(b, c), get_midpoint(c, a)
                out.extend([
                    ((a, mab, mca), origin, False),
                    ((mab, b, mbc), origin, False),
                    ((mca, mbc, c), origin, False),
                    ((mab, mbc, mca), origin, False),
                ])
            else:
                out.append((tri, origin, force))
        items = out
        if not any_red:
            break

    new_cells = []
    kinds = []
    parents = []
    green_parents: dict[int, tuple[int, int, int]] = {}
    for tri, origin, _ in items:
        n = split_count(tri)
        if n == 0:
            new_cells.append(tri)
            kinds.append(REGULAR)
            parents.append(origin)
        else:  # n == 1: green bisection
            a, b, c = tri
            for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
                m = midpoint.get(_key(p, q))
                if m is not None:
                    for child in ((p, m, r), (m, q, r)):
                        green_parents[len(new_cells)] = (p, q, r)
                        new_cells.append(child)
                        kinds.append(GREEN)
                        parents.append(origin)
                    break

    return Mesh(
        np.array(coords),
        np.array(new_cells, dtype=np.int64),
        boundary_classifier=mesh.boundary_classifier,
        cell_kind=np.array(kinds, dtype=np.uint8),
        cell_parent=np.array(parents, dtype=np.int64),
        green_parents=green_parents,
        new_vertex_edges=new_vertex_edges,
        generation=mesh.generation + 1,
    )


def uniform_refine(mesh: Mesh) -> Mesh:
    """Red-refine every cell (greens are coarsened and their parents refined)."""
    return red_green_refine(mesh, range(mesh.num_cells))


def interpolate_to_refined(coarse: Mesh, fine: Mesh, u: np.ndarray) -> np.ndarray:
    """Transfer nodal values to a refinement of `coarse` by P1 interpolation.

    Pre-existing vertices keep their values; each new midpoint vertex takes
    the average of its parent edge's endpoint values.
    """
    if len(u) != coarse.num_vertices:
        raise ValueError("nodal vector does not match the coarse mesh")
    out = np.empty(fine.num_vertices)
    out[: len(u)] = u
    for v in sorted(fine.new_vertex_edges):
        p, q = fine.new_vertex_edges[v]
        out[v] = 0.5 * (out[p] + out[q])
    return out


# ----------------------------------------------------------------------
# VTK export (legacy ASCII, triangles only)


def write_vtk(mesh: Mesh, path, point_data: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("stabfem mesh\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} float\n")
        for x, y in mesh.coords:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        m = mesh.num_cells
        fh.write(f"CELLS {m} {4 * m}\n")
        for a, b, c in mesh.cells:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {m}\n")
        for _ in range(m):
            fh.write("5\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, values in point_data.items():
                fh.write(f"SCALARS {name} float 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in values:
                    fh.write(f"{v:.17g}\n")


def read_vtk(path, boundary_classifier: Optional[BoundaryClassifier] = None) -> Mesh:
    """Read a mesh written by `write_vtk` (point data is ignored)."""
    with open(path) as fh:
        tokens = fh.read().split()
    i = tokens.index("POINTS")
    n = int(tokens[i + 1])
    vals = tokens[i + 3 : i + 3 + 3 * n]
    coords = np.array(vals, dtype=float).reshape(n, 3)[:, :2]
    i = tokens.index("CELLS")
    m = int(tokens[i + 1])
    cells = np.empty((m, 3), dtype=np.int64)
    j = i + 3
    for c in range(m):
        if tokens[j] != "3":
            raise ValueError("only triangle cells are supported")
        cells[c] = [int(tokens[j + 1]), int(tokens[j + 2]), int(tokens[j + 3])]
        j += 4
    return Mesh(coords, cells, boundary_classifier=boundary_classifier)
