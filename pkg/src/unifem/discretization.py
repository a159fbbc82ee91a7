"""Reference cells, quadrature rules, Lagrange tabulation and cell geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import (
    QUADRILATERAL,
    SEGMENT,
    SHAPE_DIM,
    TETRAHEDRON,
    TRIANGLE,
    MeshPlex,
    build_from_cells,
)

REFERENCE_VERTICES = {
    SEGMENT: np.array([[0.0], [1.0]]),
    TRIANGLE: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    QUADRILATERAL: np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
    TETRAHEDRON: np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
}

REFERENCE_MEASURE = {SEGMENT: 1.0, TRIANGLE: 0.5, QUADRILATERAL: 1.0, TETRAHEDRON: 1.0 / 6.0}


class DiscretizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    shape: str
    points: np.ndarray  # (nq, dim)
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _collapsed_simplex(dim, degree):
    """Conical product rule via the Duffy collapse; exact to ``degree``."""
    # the collapse adds a factor (1 - s)^k of degree <= dim - 1 per direction
    n = math.ceil((degree + dim) / 2)
    x, w = _gauss01(n)
    if dim == 2:
        s, t = np.meshgrid(x, x, indexing="ij")
        ws, wt = np.meshgrid(w, w, indexing="ij")
        pts = np.column_stack([s.ravel(), (t * (1 - s)).ravel()])
        wts = (ws * wt * (1 - s)).ravel()
        return pts, wts
    s, t, r = np.meshgrid(x, x, x, indexing="ij")
    ws, wt, wr = np.meshgrid(w, w, w, indexing="ij")
    px = s
    py = t * (1 - s)
    pz = r * (1 - s) * (1 - t)
    pts = np.column_stack([px.ravel(), py.ravel(), pz.ravel()])
    wts = (ws * wt * wr * (1 - s) ** 2 * (1 - t)).ravel()
    return pts, wts


def _triangle_rule(degree):
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([0.5])
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 6)
    if degree <= 4:
        # symmetric 6-point rule (two orbits of three)
        a, wa = 0.44594849091596488632, 0.22338158967801146570
        b, wb = 0.091576213509770743460, 0.10995174365532186764
        pts = []
        wts = []
        for c, wc in ((a, wa), (b, wb)):
            for bary in ((c, c, 1 - 2 * c), (c, 1 - 2 * c, c), (1 - 2 * c, c, c)):
                pts.append(bary[:2])
                wts.append(wc / 2)
        return np.array(pts), np.array(wts)
    return _collapsed_simplex(2, degree)


def _tet_rule(degree):
    if degree <= 1:
        return np.array([[0.25, 0.25, 0.25]]), np.array([1 / 6])
    if degree == 2:
        a = (5 + 3 * math.sqrt(5)) / 20
        b = (5 - math.sqrt(5)) / 20
        pts = np.array([[b, b, b], [a, b, b], [b, a, b], [b, b, a]])
        return pts, np.full(4, 1 / 24)
    return _collapsed_simplex(3, degree)


@lru_cache(maxsize=None)
def make_quadrature(shape: str, degree: int) -> QuadratureRule:
    """Quadrature exact for polynomials of total degree ``degree``.

    Tensor rules on the quadrilateral are exact per coordinate direction.
    Simplex rules above the tabulated symmetric ones use a collapsed
    Gauss product.
    """
    if degree < 1:
        raise DiscretizationError(f"quadrature degree must be >= 1, got {degree}")
    if shape == SEGMENT:
        x, w = _gauss01(math.ceil((degree + 1) / 2))
        pts, wts = x[:, None], w
    elif shape == QUADRILATERAL:
        x, w = _gauss01(math.ceil((degree + 1) / 2))
        X, Y = np.meshgrid(x, x, indexing="ij")
        WX, WY = np.meshgrid(w, w, indexing="ij")
        pts, wts = np.column_stack([X.ravel(), Y.ravel()]), (WX * WY).ravel()
    elif shape == TRIANGLE:
        pts, wts = _triangle_rule(degree)
    elif shape == TETRAHEDRON:
        pts, wts = _tet_rule(degree)
    else:
        raise DiscretizationError(f"unsupported shape {shape!r}")
    pts = np.ascontiguousarray(pts, dtype=float)
    wts = np.ascontiguousarray(wts, dtype=float)
    pts.flags.writeable = False
    wts.flags.writeable = False
    return QuadratureRule(shape, pts, wts, degree)


# ---------------------------------------------------------------------------
# Lagrange elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Element:
    """A nodal Lagrange element described by its dof layout.

    ``dofs_per_depth[d]`` is the number of nodes on each point of depth ``d``.
    Basis functions are ordered like the nodes met in the reference cell's
    transitive closure, which is also the order ``vec_get_closure`` returns.
    """

    name: str
    shape: str
    degree: int
    dofs_per_depth: tuple[int, ...]

    @property
    def dim(self) -> int:
        return SHAPE_DIM[self.shape]


_DOFS = {
    ("P0", SEGMENT): (0, 1),
    ("P0", TRIANGLE): (0, 0, 1),
    ("P0", QUADRILATERAL): (0, 0, 1),
    ("P0", TETRAHEDRON): (0, 0, 0, 1),
    ("P1", SEGMENT): (1, 0),
    ("P1", TRIANGLE): (1, 0, 0),
    ("P1", TETRAHEDRON): (1, 0, 0, 0),
    ("P2", SEGMENT): (1, 1),
    ("P2", TRIANGLE): (1, 1, 0),
    ("Q1", QUADRILATERAL): (1, 0, 0),
}
_DEGREE = {"P0": 0, "P1": 1, "P2": 2, "Q1": 1}


def lagrange_element(name: str, shape: str) -> Element:
    name = name.upper()
    key = (name, shape)
    if key not in _DOFS:
        raise DiscretizationError(f"element {name} is not available on a {shape}")
    return Element(name, shape, _DEGREE[name], _DOFS[key])


def coordinate_element(shape: str) -> Element:
    return lagrange_element("Q1" if shape == QUADRILATERAL else "P1", shape)


@lru_cache(maxsize=None)
def reference_mesh(shape: str) -> MeshPlex:
    verts = REFERENCE_VERTICES[shape]
    return build_from_cells(SHAPE_DIM[shape], [tuple(range(len(verts)))], verts, shape=shape)


def element_nodes(element: Element) -> np.ndarray:
    """Reference coordinates of the element nodes, in closure order."""
    ref = reference_mesh(element.shape)
    nodes = []
    for p, _ in ref.transitive_closure(0):
        k = element.dofs_per_depth[ref.depth[p]]
        if k == 0:
            continue
        if k != 1:
            raise DiscretizationError("at most one node per mesh point is supported")
        nodes.append(ref.point_coordinates(p))
    return np.array(nodes)


def _exponents(element: Element):
    dim, k = element.dim, element.degree
    if element.name == "Q1":
        return [(a, b) for b in range(2) for a in range(2)]
    out = []
    for total in range(k + 1):
        if dim == 1:
            out.append((total,))
        elif dim == 2:
            out.extend((total - b, b) for b in range(total + 1))
        else:
            for c in range(total + 1):
                out.extend((total - b - c, b, c) for b in range(total - c + 1))
    return out


def _monomials(exps, x):
    """Values ``(npts, nm)`` and gradients ``(npts, nm, dim)`` of monomials."""
    x = np.atleast_2d(x)
    npts, dim = x.shape
    vals = np.ones((npts, len(exps)))
    grads = np.zeros((npts, len(exps), dim))
    for m, e in enumerate(exps):
        for d in range(dim):
            vals[:, m] *= x[:, d] ** e[d]
            g = np.full(npts, float(e[d])) if e[d] > 0 else np.zeros(npts)
            for dd in range(dim):
                if dd == d:
                    g = g * (x[:, dd] ** (e[dd] - 1) if e[dd] > 0 else 0.0)
                else:
                    g = g * x[:, dd] ** e[dd]
            grads[:, m, d] = g
    return vals, grads


@dataclass(frozen=True, eq=False)
class Tabulation:
    """Basis values ``B[q, i]`` and reference gradients ``D[q, i, d]``."""

    element: Element
    rule: QuadratureRule
    B: np.ndarray
    D: np.ndarray

    @property
    def nq(self) -> int:
        return self.B.shape[0]

    @property
    def nb(self) -> int:
        return self.B.shape[1]

    @property
    def dim(self) -> int:
        return self.D.shape[2]


def evaluate_basis(element: Element, x) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and reference gradients at reference points ``x``."""
    exps = _exponents(element)
    V, _ = _monomials(exps, element_nodes(element))
    coeffs = np.linalg.inv(V)  # column i holds basis i
    vals, grads = _monomials(exps, np.asarray(x, dtype=float).reshape(-1, element.dim))
    B = vals @ coeffs
    D = np.einsum("qmd,mi->qid", grads, coeffs)
    return B, D


def tabulate(element: Element, rule: QuadratureRule) -> Tabulation:
    if rule.shape != element.shape:
        raise DiscretizationError(f"{element.name} on {element.shape} with a {rule.shape} rule")
    B, D = evaluate_basis(element, rule.points)
    # snap round-off so that exact zeros (e.g. P1 gradients) stay exact
    B[np.abs(B) < 1e-15] = 0.0
    D[np.abs(D) < 1e-15] = 0.0
    for arr in (B, D):
        arr.flags.writeable = False
    return Tabulation(element, rule, B, D)


def default_tabulation(element: Element, degree: int | None = None) -> Tabulation:
    """Tabulate on the default rule of degree ``2 * element.degree``."""
    if degree is None:
        degree = max(2 * element.degree, 1)
    return tabulate(element, make_quadrature(element.shape, degree))


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Per-quadrature-point geometry of one cell (or a chunk, leading axis)."""

    x: np.ndarray  # (..., nq, dim)
    J: np.ndarray  # (..., nq, dim, dim), J[a, b] = dx_a / dxi_b
    Jinv: np.ndarray  # (..., nq, dim, dim), Jinv[b, a] = dxi_b / dx_a
    detJ: np.ndarray  # (..., nq)
    scaling: np.ndarray  # (..., nq), |det J| * w


def _inverse_and_det(J):
    """Explicit elementwise inverse; keeps each cell's arithmetic independent."""
    dim = J.shape[-1]
    if dim == 1:
        det = J[..., 0, 0].copy()
        inv = 1.0 / J
        return inv, det
    if dim == 2:
        a, b, c, d = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
        det = a * d - b * c
        inv = np.empty_like(J)
        inv[..., 0, 0] = d / det
        inv[..., 0, 1] = -b / det
        inv[..., 1, 0] = -c / det
        inv[..., 1, 1] = a / det
        return inv, det
    cof = np.empty_like(J)
    for i in range(3):
        for j in range(3):
            i1, i2 = (i + 1) % 3, (i + 2) % 3
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            cof[..., i, j] = J[..., i1, j1] * J[..., i2, j2] - J[..., i1, j2] * J[..., i2, j1]
    det = J[..., 0, 0] * cof[..., 0, 0] + J[..., 0, 1] * cof[..., 0, 1] + J[..., 0, 2] * cof[..., 0, 2]
    inv = np.swapaxes(cof, -1, -2) / det[..., None, None]
    return inv, det


def chunk_geometry(coords_e: np.ndarray, coord_tab: Tabulation) -> CellGeometry:
    """Geometry for a chunk of cells.

    ``coords_e`` has shape ``(ncells, nv, dim)`` with vertices in closure
    order; ``coord_tab`` is the P1/Q1 coordinate element on the solution rule.
    """
    n, nv, dim = coords_e.shape
    B, D, w = coord_tab.B, coord_tab.D, coord_tab.rule.weights
    nq = B.shape[0]
    x = np.zeros((n, nq, dim))
    J = np.zeros((n, nq, dim, dim))
    for v in range(nv):
        Xv = coords_e[:, v, :]
        x += B[None, :, v, None] * Xv[:, None, :]
        J += Xv[:, None, :, None] * D[None, :, v, None, :]
    Jinv, det = _inverse_and_det(J)
    if np.any(det <= 0):
        bad = np.flatnonzero(np.any(det <= 0, axis=1))
        raise DiscretizationError(f"inverted or degenerate cell(s) at chunk positions {bad.tolist()}")
    scaling = det * w[None, :]
    return CellGeometry(x=x, J=J, Jinv=Jinv, detJ=det, scaling=scaling)


@lru_cache(maxsize=None)
def _coord_tab(shape, rule):
    return tabulate(coordinate_element(shape), rule)


def coordinate_tabulation(rule: QuadratureRule) -> Tabulation:
    return _coord_tab(rule.shape, rule)


def compute_cell_geometry(mesh: MeshPlex, coord_section, coord_vec, cell: int, rule: QuadratureRule) -> CellGeometry:
    """Geometry of a single cell, coordinates pulled through ``coord_section``."""
    from .layout import vec_get_closure

    vals = vec_get_closure(mesh, coord_section, coord_vec, cell)
    coords_e = vals.reshape(1, -1, mesh.dim)
    g = chunk_geometry(coords_e, coordinate_tabulation(rule))
    return CellGeometry(x=g.x[0], J=g.J[0], Jinv=g.Jinv[0], detJ=g.detJ[0], scaling=g.scaling[0])
