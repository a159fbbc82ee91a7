"""Unstructured mesh topology stored as a Hasse diagram.

Every entity (cell, face, edge, vertex) is a *point* in one index space.
Points are numbered cells first, then vertices, then edges, then faces, so
each depth (and height) stratum is a contiguous range.

Orientation tags follow one convention for all polygons with ``n`` vertices:
``o >= 0`` means the seen vertex order is the stored order rotated by ``o``,
``o = -k`` means ``seen[i] = stored[(k - i) % n]``.  For an edge this leaves
``0`` (as stored) and ``-1`` (reversed).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

SEGMENT = "segment"
TRIANGLE = "triangle"
QUADRILATERAL = "quadrilateral"
TETRAHEDRON = "tetrahedron"

SHAPE_DIM = {"vertex": 0, SEGMENT: 1, TRIANGLE: 2, QUADRILATERAL: 2, TETRAHEDRON: 3}

# Local boundary templates: (child shape, local vertex indices) in cone order.
_TEMPLATES: dict[str, list[tuple[str, tuple[int, ...]]]] = {
    SEGMENT: [("vertex", (0,)), ("vertex", (1,))],
    TRIANGLE: [(SEGMENT, (0, 1)), (SEGMENT, (1, 2)), (SEGMENT, (2, 0))],
    QUADRILATERAL: [(SEGMENT, (0, 1)), (SEGMENT, (1, 2)), (SEGMENT, (2, 3)), (SEGMENT, (3, 0))],
    TETRAHEDRON: [
        (TRIANGLE, (0, 1, 2)),
        (TRIANGLE, (0, 3, 1)),
        (TRIANGLE, (0, 2, 3)),
        (TRIANGLE, (2, 1, 3)),
    ],
}

_ARITY = {2: SEGMENT, 3: TRIANGLE}


class MeshError(ValueError):
    """Raised for malformed mesh input or invalid point queries."""


class ClosurePoint(NamedTuple):
    point: int
    orientation: int


def orientation_code(stored: Sequence[int], seen: Sequence[int]) -> int:
    """Return the tag that maps the ``stored`` vertex order onto ``seen``."""
    n = len(stored)
    if n == 1:
        return 0
    if n == 2:
        if tuple(seen) == tuple(stored):
            return 0
        if tuple(seen) == (stored[1], stored[0]):
            return -1
        raise MeshError(f"{seen} is not a permutation of edge {stored}")
    i = list(stored).index(seen[0]) if seen[0] in stored else -1
    if i >= 0:
        if all(seen[j] == stored[(i + j) % n] for j in range(n)):
            return i
        k = i if i > 0 else n
        if all(seen[j] == stored[(k - j) % n] for j in range(n)):
            return -k
    raise MeshError(f"{seen} is not a dihedral image of {stored}")


def _flip(o: int) -> int:
    # edges only carry 0 / -1
    return -1 - o


@dataclass(eq=False)
class MeshPlex:
    """Immutable mesh DAG with cone/support arrows and strata.

    Attributes
    ----------
    dim : topological (and embedding) dimension.
    num_cells, num_vertices : sizes of the two leading point ranges.
    shapes : per-point shape name (``"vertex"`` for vertices).
    depth : per-point depth (0 for vertices, ``dim`` for cells).
    cone_offsets, cone_points, cone_orientations : CSR storage of cones.
    support_offsets, support_points : CSR storage of supports, ascending.
    stored_vertices : per-point vertex tuple in stored order.
    coordinates : ``(num_vertices, dim)`` vertex positions.
    """

    dim: int
    num_cells: int
    num_vertices: int
    shapes: list[str]
    depth: np.ndarray
    cone_offsets: np.ndarray
    cone_points: np.ndarray
    cone_orientations: np.ndarray
    support_offsets: np.ndarray
    support_points: np.ndarray
    stored_vertices: list[tuple[int, ...]]
    coordinates: np.ndarray

    def __post_init__(self):
        self._closure_cache: dict[int, list[ClosurePoint]] = {}
        self._strata: dict[int, tuple[int, int]] = {}
        for d in range(self.dim + 1):
            pts = np.flatnonzero(self.depth == d)
            if len(pts) == 0:
                self._strata[d] = (0, 0)
                continue
            start, end = int(pts[0]), int(pts[-1]) + 1
            if end - start != len(pts):
                raise MeshError(f"depth stratum {d} is not contiguous")
            self._strata[d] = (start, end)

    @cached_property
    def _cones(self) -> list[list[tuple[int, int]]]:
        co, cp, cr = self.cone_offsets.tolist(), self.cone_points.tolist(), self.cone_orientations.tolist()
        return [list(zip(cp[co[p]:co[p + 1]], cr[co[p]:co[p + 1]])) for p in range(len(self.shapes))]

    @cached_property
    def _supports(self) -> list[list[int]]:
        so, sp = self.support_offsets.tolist(), self.support_points.tolist()
        return [sp[so[p]:so[p + 1]] for p in range(len(self.shapes))]

    @property
    def num_points(self) -> int:
        return len(self.shapes)

    @property
    def cell_shape(self) -> str:
        """Shape of the cells; the simplex of the mesh dimension when there are none."""
        if self.num_cells:
            return self.shapes[0]
        return {1: SEGMENT, 2: TRIANGLE, 3: TETRAHEDRON}[self.dim]

    @property
    def height(self) -> np.ndarray:
        return self.dim - self.depth

    def _check_point(self, p: int) -> int:
        p = int(p)
        if not 0 <= p < len(self.shapes):
            raise MeshError(f"point {p} outside [0, {self.num_points})")
        return p

    def cone(self, p: int) -> list[tuple[int, int]]:
        return list(self._cones[self._check_point(p)])

    def support(self, p: int) -> list[int]:
        return list(self._supports[self._check_point(p)])

    def support_size(self, p: int) -> int:
        return len(self._supports[self._check_point(p)])

    def get_depth_stratum(self, d: int) -> tuple[int, int]:
        if not 0 <= d <= self.dim:
            raise MeshError(f"depth {d} outside [0, {self.dim}]")
        return self._strata[d]

    def get_height_stratum(self, h: int) -> tuple[int, int]:
        if not 0 <= h <= self.dim:
            raise MeshError(f"height {h} outside [0, {self.dim}]")
        return self._strata[self.dim - h]

    def _oriented_cone(self, p: int, o: int) -> list[tuple[int, int]]:
        """Cone of ``p`` as seen through orientation ``o`` with composed tags."""
        cone = self._cones[p]
        if o == 0:
            return cone
        shape = self.shapes[p]
        n = len(cone)
        if shape == SEGMENT:
            return [(q, 0) for q, _ in reversed(cone)]
        if shape in (TRIANGLE, QUADRILATERAL):
            if o > 0:
                return [cone[(j + o) % n] for j in range(n)]
            k = -o
            out = []
            for j in range(n):
                q, qo = cone[(k - j - 1) % n]
                out.append((q, _flip(qo)))
            return out
        raise NotImplementedError(
            f"orientation composition through a {shape} is not supported"
        )

    def transitive_closure(self, p: int) -> list[ClosurePoint]:
        """Breadth-first closure of ``p``; first encounter wins."""
        p = self._check_point(p)
        cached = self._closure_cache.get(p)
        if cached is not None:
            return cached
        out = [ClosurePoint(p, 0)]
        seen = {p}
        frontier = [(p, 0)]
        while frontier:
            nxt = []
            for q, o in frontier:
                for r, ro in self._oriented_cone(q, o):
                    if r in seen:
                        continue
                    seen.add(r)
                    out.append(ClosurePoint(r, ro))
                    nxt.append((r, ro))
            frontier = nxt
        self._closure_cache[p] = out
        return out

    def cell_vertices(self, c: int) -> tuple[int, ...]:
        """Vertex *indices* (0-based, not point numbers) of a cell or entity."""
        return tuple(v - self.num_cells for v in self.stored_vertices[self._check_point(c)])

    def vertex_point(self, v: int) -> int:
        return self.num_cells + v

    def point_coordinates(self, p: int) -> np.ndarray:
        """Barycenter of the vertices of point ``p``."""
        verts = self.cell_vertices(p)
        return self.coordinates[list(verts)].mean(axis=0)

    def boundary_faces(self) -> list[int]:
        """Height-1 points covered by exactly one cell."""
        start, end = self.get_height_stratum(1)
        return [f for f in range(start, end) if self.support_size(f) == 1]


def _infer_shapes(dim, cell_vertices, shape):
    if shape is not None:
        if isinstance(shape, str):
            return [shape] * len(cell_vertices)
        shapes = list(shape)
        if len(shapes) != len(cell_vertices):
            raise MeshError("one shape tag per cell required")
        return shapes
    arities = {len(c) for c in cell_vertices}
    if len(arities) > 1:
        raise MeshError("mixed-arity cells require explicit shape tags")
    (arity,) = arities or {dim + 1}
    if arity == 4:
        return [QUADRILATERAL if dim == 2 else TETRAHEDRON] * len(cell_vertices)
    if arity in _ARITY:
        return [_ARITY[arity]] * len(cell_vertices)
    raise MeshError(f"cannot infer cell shape from arity {arity}")


def _canonical_face(seen: tuple[int, ...]) -> tuple[int, ...]:
    # rotate so the smallest vertex leads; keeps the encountering cell's winding
    k = seen.index(min(seen))
    return seen[k:] + seen[:k]


def build_from_cells(
    dim: int,
    cell_vertices: Sequence[Sequence[int]],
    vertex_coords,
    shape: str | Sequence[str] | None = None,
) -> MeshPlex:
    """Build a fully interpolated mesh DAG from cell-vertex lists.

    Edges are stored as (lower, higher) vertex point; a face is stored in the
    winding of the first cell that references it, rotated to start at its
    smallest vertex.
    """
    if dim not in (1, 2, 3):
        raise MeshError(f"unsupported dimension {dim}")
    coords = np.asarray(vertex_coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.ndim != 2 or coords.shape[1] != dim:
        raise MeshError(f"vertex coordinates must have shape (nV, {dim})")
    nV = coords.shape[0]
    cells = [tuple(int(v) for v in c) for c in cell_vertices]
    nC = len(cells)
    shapes = _infer_shapes(dim, cells, shape)
    for c, shp in enumerate(shapes):
        if shp not in _TEMPLATES or SHAPE_DIM[shp] != dim:
            raise MeshError(f"cell {c}: shape {shp!r} invalid in dimension {dim}")

    if nC and len(set(shapes)) == 1 and len({len(c) for c in cells}) == 1:
        shp = shapes[0]
        arr = np.asarray(cells, dtype=np.int64).reshape(nC, -1)
        _validate_uniform(arr, shp, nV)
        topo = _interpolate_uniform(dim, arr, shp, nV)
    else:
        _validate_general(cells, shapes, nV)
        topo = _interpolate_general(dim, cells, shapes, nV)
    point_shapes, stored, depth, cone_offsets, cone_points_a, cone_orients_a = topo

    n_points = len(point_shapes)
    owners = np.repeat(np.arange(n_points), np.diff(cone_offsets))
    order = np.lexsort((owners, cone_points_a))
    support_points = owners[order]
    counts = np.bincount(cone_points_a, minlength=n_points)
    support_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    return MeshPlex(
        dim=dim,
        num_cells=nC,
        num_vertices=nV,
        shapes=point_shapes,
        depth=depth,
        cone_offsets=cone_offsets,
        cone_points=cone_points_a,
        cone_orientations=cone_orients_a,
        support_offsets=support_offsets,
        support_points=support_points,
        stored_vertices=stored,
        coordinates=coords,
    )


_ARITY_OF = {SEGMENT: 2, TRIANGLE: 3, QUADRILATERAL: 4, TETRAHEDRON: 4}


def _validate_general(cells, shapes, nV):
    seen_cells = set()
    for c, (verts, shp) in enumerate(zip(cells, shapes)):
        expected = _ARITY_OF[shp]
        if len(verts) != expected:
            raise MeshError(f"cell {c}: {shp} needs {expected} vertices, got {len(verts)}")
        for v in verts:
            if not 0 <= v < nV:
                raise MeshError(f"cell {c}: dangling vertex index {v}")
        if len(set(verts)) != len(verts):
            raise MeshError(f"cell {c}: repeated vertex")
        key = frozenset(verts)
        if key in seen_cells:
            raise MeshError(f"cell {c}: duplicate cell")
        seen_cells.add(key)


def _validate_uniform(arr, shp, nV):
    nC, k = arr.shape
    if nC == 0:
        return
    if k != _ARITY_OF[shp]:
        raise MeshError(f"cell 0: {shp} needs {_ARITY_OF[shp]} vertices, got {k}")
    bad = np.flatnonzero(((arr < 0) | (arr >= nV)).any(axis=1))
    if len(bad):
        c = int(bad[0])
        v = next(int(v) for v in arr[c] if not 0 <= v < nV)
        raise MeshError(f"cell {c}: dangling vertex index {v}")
    srt = np.sort(arr, axis=1)
    bad = np.flatnonzero((np.diff(srt, axis=1) == 0).any(axis=1))
    if len(bad):
        raise MeshError(f"cell {int(bad[0])}: repeated vertex")
    _, first, inverse = np.unique(srt, axis=0, return_index=True, return_inverse=True)
    dup = np.flatnonzero(first[inverse.ravel()] != np.arange(nC))
    if len(dup):
        raise MeshError(f"cell {int(dup[0])}: duplicate cell")


def _interpolate_general(dim, cells, shapes, nV):
    """Entity discovery by recursive first encounter; handles hybrid meshes."""
    nC = len(cells)
    # point tuples are in point numbers (vertex v -> nC + v)
    point_shapes: list[str] = list(shapes) + ["vertex"] * nV
    stored: list[tuple[int, ...]] = [tuple(nC + v for v in c) for c in cells]
    stored += [(nC + v,) for v in range(nV)]

    edge_index: dict[frozenset, int] = {}
    face_index: dict[frozenset, int] = {}
    edges: list[tuple[int, ...]] = []
    faces: list[tuple[int, ...]] = []
    faces_shape: list[str] = []
    # cones as (point, seen tuple) before numbering of edges/faces is final
    raw_cones: dict[tuple[str, int], list[tuple[str, int, tuple[int, ...]]]] = {}

    def entity(kind_shape, seen):
        if kind_shape == "vertex":
            return ("v", seen[0] - nC)
        key = frozenset(seen)
        if kind_shape == SEGMENT and dim > 1:
            idx = edge_index.get(key)
            if idx is None:
                idx = len(edges)
                edge_index[key] = idx
                edges.append(tuple(sorted(seen)))
                raw_cones[("e", idx)] = [
                    ("v", v - nC, (v,)) for v in sorted(seen)
                ]
            return ("e", idx)
        idx = face_index.get(key)
        if idx is None:
            idx = len(faces)
            face_index[key] = idx
            stored_face = _canonical_face(seen)
            faces.append(stored_face)
            faces_shape.append(kind_shape)
            raw_cones[("f", idx)] = [
                (*entity(sub, tuple(stored_face[i] for i in loc)), tuple(stored_face[i] for i in loc))
                for sub, loc in _TEMPLATES[kind_shape]
            ]
        return ("f", idx)

    for c, shp in enumerate(shapes):
        tup = stored[c]
        raw_cones[("c", c)] = [
            (*entity(sub, tuple(tup[i] for i in loc)), tuple(tup[i] for i in loc))
            for sub, loc in _TEMPLATES[shp]
        ]

    nE, nF = len(edges), len(faces)
    base = {"c": 0, "v": nC, "e": nC + nV, "f": nC + nV + nE}
    point_shapes += [SEGMENT] * nE + faces_shape
    stored += edges + faces
    n_points = nC + nV + nE + nF

    depth = np.array([SHAPE_DIM[s] for s in point_shapes], dtype=np.int64)

    cone_offsets = np.zeros(n_points + 1, dtype=np.int64)
    cone_points: list[int] = []
    cone_orients: list[int] = []
    for p in range(n_points):
        if p < nC:
            key = ("c", p)
        elif p < nC + nV:
            key = None
        elif p < nC + nV + nE:
            key = ("e", p - nC - nV)
        else:
            key = ("f", p - nC - nV - nE)
        for kind, idx, seen in raw_cones.get(key, []) if key else []:
            q = base[kind] + idx
            cone_points.append(q)
            cone_orients.append(orientation_code(stored[q], seen))
        cone_offsets[p + 1] = len(cone_points)
    return (
        point_shapes,
        stored,
        depth,
        cone_offsets,
        np.asarray(cone_points, dtype=np.int64),
        np.asarray(cone_orients, dtype=np.int64),
    )


def _first_encounter(rows: np.ndarray):
    """Number the distinct rows of ``rows`` (sorted per row) by first appearance.

    Returns ``(ids, first)``: the id of every row and, per id, the index of
    the row that introduced it.
    """
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    _, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse.ravel()], first[order]


def _orientation_codes(stored: np.ndarray, seen: np.ndarray) -> np.ndarray:
    """Vectorized ``orientation_code`` over rows."""
    m, n = stored.shape
    if n == 2:
        fwd = (seen == stored).all(axis=1)
        rev = (seen == stored[:, ::-1]).all(axis=1)
        if not (fwd | rev).all():
            raise MeshError("edge orientation is not a permutation")
        return np.where(fwd, 0, -1).astype(np.int64)
    codes = np.full(m, np.iinfo(np.int64).min, dtype=np.int64)
    j = np.arange(n)
    for i in range(n):
        hit = (seen == stored[:, (i + j) % n]).all(axis=1)
        codes[hit] = i
    for k in range(1, n + 1):
        hit = (seen == stored[:, (k - j) % n]).all(axis=1)
        codes[hit] = -k
    if (codes == np.iinfo(np.int64).min).any():
        raise MeshError("face orientation is not a dihedral image")
    return codes


def _interpolate_uniform(dim, arr, shp, nV):
    """Array version of ``_interpolate_general`` for single-shape meshes.

    Produces the identical numbering: edges and faces are numbered by first
    encounter in cell order (3D edges by first encounter in face order).
    """
    nC, k = arr.shape
    P = arr + nC
    vbase = nC
    ebase = nC + nV
    tmpl = _TEMPLATES[shp]
    loc = np.array([l for _, l in tmpl])
    nsub = len(tmpl)

    def edges_from(tuples):
        # tuples (m, n) in point numbers; returns seen rows, ids, stored edges
        eloc = np.array([l for _, l in _TEMPLATES[_polygon(tuples.shape[1])]])
        seen = tuples[:, eloc].reshape(-1, 2)
        ids, first = _first_encounter(np.sort(seen, axis=1))
        return seen, ids, np.sort(seen[first], axis=1)

    if dim == 1:
        edges = np.zeros((0, 2), dtype=np.int64)
        faces = np.zeros((0, 3), dtype=np.int64)
        cell_cone = P.reshape(-1)
        cell_orient = np.zeros(len(cell_cone), dtype=np.int64)
        face_cone = face_orient = np.zeros(0, dtype=np.int64)
    elif dim == 2:
        seen, ids, edges = edges_from(P)
        faces = np.zeros((0, 3), dtype=np.int64)
        cell_cone = ebase + ids
        cell_orient = _orientation_codes(edges[ids], seen)
        face_cone = face_orient = np.zeros(0, dtype=np.int64)
    else:
        fseen = P[:, loc].reshape(-1, loc.shape[1])
        fids, ffirst = _first_encounter(np.sort(fseen, axis=1))
        first_seen = fseen[ffirst]
        r = np.argmin(first_seen, axis=1)[:, None]
        nf = first_seen.shape[1]
        faces = np.take_along_axis(first_seen, (r + np.arange(nf)) % nf, axis=1)
        eseen, eids, edges = edges_from(faces)
        nE = len(edges)
        fbase = ebase + nE
        cell_cone = fbase + fids
        cell_orient = _orientation_codes(faces[fids], fseen)
        face_cone = ebase + eids
        face_orient = _orientation_codes(edges[eids], eseen)

    nE, nF = len(edges), len(faces)
    n_points = nC + nV + nE + nF
    counts = np.concatenate(
        [
            np.full(nC, nsub if dim > 1 else 2),
            np.zeros(nV, dtype=np.int64),
            np.full(nE, 2),
            np.full(nF, faces.shape[1] if nF else 0),
        ]
    ).astype(np.int64)
    cone_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    cone_points = np.concatenate([cell_cone, edges.reshape(-1), face_cone]).astype(np.int64)
    cone_orients = np.concatenate(
        [cell_orient, np.zeros(2 * nE, dtype=np.int64), face_orient]
    ).astype(np.int64)

    face_shape = _polygon(faces.shape[1]) if nF else None
    point_shapes = [shp] * nC + ["vertex"] * nV + [SEGMENT] * nE + [face_shape] * nF
    stored = list(map(tuple, P.tolist()))
    stored += [(vbase + v,) for v in range(nV)]
    stored += list(map(tuple, edges.tolist())) + list(map(tuple, faces.tolist()))
    depth = np.concatenate(
        [
            np.full(nC, dim),
            np.zeros(nV, dtype=np.int64),
            np.ones(nE, dtype=np.int64),
            np.full(nF, 2),
        ]
    ).astype(np.int64)
    assert len(depth) == n_points
    return point_shapes, stored, depth, cone_offsets, cone_points, cone_orients


def _polygon(n: int) -> str:
    return {3: TRIANGLE, 4: QUADRILATERAL}[n]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def unit_interval(n: int) -> MeshPlex:
    x = np.linspace(0.0, 1.0, n + 1)
    cells = [(i, i + 1) for i in range(n)]
    return build_from_cells(1, cells, x[:, None])


def _square_vertices(n):
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)  # row j is y = t[j]
    return np.column_stack([X.ravel(), Y.ravel()])


def unit_square_tri(n: int) -> MeshPlex:
    """``2 n^2`` counterclockwise triangles, each square split along (0,0)-(1,1)."""
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return build_from_cells(2, cells, _square_vertices(n))


def unit_square_quad(n: int) -> MeshPlex:
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            cells.append((v00, v00 + 1, v00 + n + 2, v00 + n + 1))
    return build_from_cells(2, cells, _square_vertices(n), shape=QUADRILATERAL)


def unit_cube_tet(n: int) -> MeshPlex:
    """Kuhn decomposition: 6 positively oriented tetrahedra per cube."""
    t = np.linspace(0.0, 1.0, n + 1)
    Z, Y, X = np.meshgrid(t, t, t, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    stride = np.array([1, n + 1, (n + 1) ** 2])
    # (axis order, odd permutation) -> odd paths need two vertices swapped
    perms = [((0, 1, 2), False), ((0, 2, 1), True), ((1, 0, 2), True),
             ((1, 2, 0), False), ((2, 0, 1), False), ((2, 1, 0), True)]
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                v0 = i + j * stride[1] + k * stride[2]
                for perm, odd in perms:
                    path = [v0]
                    for axis in perm:
                        path.append(path[-1] + int(stride[axis]))
                    if odd:
                        path[2], path[3] = path[3], path[2]
                    cells.append(tuple(path))
    return build_from_cells(3, cells, coords, shape=TETRAHEDRON)


MESH_FAMILIES = {
    "interval": unit_interval,
    "tri-square": unit_square_tri,
    "quad-square": unit_square_quad,
    "tet-cube": unit_cube_tet,
}


def read_ascii(path) -> MeshPlex:
    """Read ``dim nV nC shape`` followed by nV coordinate and nC cell lines."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 4:
        raise MeshError("header must be: dim nV nC shape")
    dim, nV, nC = (int(v) for v in lines[0][:3])
    shape = lines[0][3]
    if len(lines) != 1 + nV + nC:
        raise MeshError(f"expected {1 + nV + nC} lines, found {len(lines)}")
    coords = np.array([[float(v) for v in ln] for ln in lines[1 : 1 + nV]])
    cells = [[int(v) for v in ln] for ln in lines[1 + nV :]]
    return build_from_cells(dim, cells, coords, shape=shape)


def write_ascii(mesh: MeshPlex, path) -> None:
    shapes = set(mesh.shapes[: mesh.num_cells])
    if len(shapes) != 1:
        raise MeshError("ASCII format holds a single cell shape")
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.num_vertices} {mesh.num_cells} {shapes.pop()}\n")
        for x in mesh.coordinates:
            fh.write(" ".join(repr(float(v)) for v in x) + "\n")
        for c in range(mesh.num_cells):
            fh.write(" ".join(str(v) for v in mesh.cell_vertices(c)) + "\n")
