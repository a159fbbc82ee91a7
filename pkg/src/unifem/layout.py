"""Data layout over mesh points: sections, closure gather/scatter, local/global maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .mesh import MeshPlex

CONSTRAINED = -1


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class FieldLayout:
    dofs_per_depth: tuple[int, ...]
    components: int = 1
    name: str = ""


class Section:
    """Size/offset map from mesh points to local dof ranges, per field.

    At each point the fields are stored one after another, so a point's dofs
    are contiguous and ``offset`` is the exclusive prefix sum over
    ``(point, field)`` pairs in lexicographic order.  Within a field the
    point's dofs are node-major with components innermost.
    """

    def __init__(self, mesh: MeshPlex, fields: Sequence[FieldLayout], constrained=()):
        self.mesh = mesh
        self.fields = tuple(fields)
        depth = mesh.depth
        self.nodes = np.stack(
            [np.asarray(f.dofs_per_depth, dtype=np.int64)[depth] for f in self.fields], axis=1
        )
        self.components = np.array([f.components for f in self.fields], dtype=np.int64)
        self.dofs = self.nodes * self.components[None, :]
        flat = self.dofs.ravel()
        self.offsets = (np.cumsum(flat) - flat).reshape(self.dofs.shape)
        self.size = int(flat.sum())
        c = np.unique(np.asarray(constrained, dtype=np.int64))
        if c.size and (c[0] < 0 or c[-1] >= self.size):
            raise LayoutError("constrained dof outside the local vector")
        self.constrained = c
        self._closure_cache: dict[tuple[int, bool], np.ndarray] = {}
        self._batch_cache: dict[int, np.ndarray] = {}

    @property
    def num_fields(self) -> int:
        return len(self.fields)

    def dof(self, point: int, field: int = 0) -> int:
        return int(self.dofs[point, field])

    def offset(self, point: int, field: int = 0) -> int:
        return int(self.offsets[point, field])

    def with_constraints(self, extra) -> "Section":
        """Copy of this section with ``extra`` local dofs also constrained."""
        out = Section.__new__(Section)
        out.__dict__.update(self.__dict__)
        out.constrained = np.unique(np.concatenate([self.constrained, np.asarray(extra, dtype=np.int64)]))
        return out

    def point_indices(self, point: int, field: int) -> np.ndarray:
        lo = self.offsets[point, field]
        return np.arange(lo, lo + self.dofs[point, field])

    def _field_closure(self, point: int, field: int) -> list[int]:
        idx: list[int] = []
        ncomp = int(self.components[field])
        for q, o in self.mesh.transitive_closure(point):
            nn = int(self.nodes[q, field])
            if nn == 0:
                continue
            base = int(self.offsets[q, field])
            nodes = range(nn - 1, -1, -1) if (o < 0 and nn > 1) else range(nn)
            for node in nodes:
                idx.extend(range(base + node * ncomp, base + (node + 1) * ncomp))
        return idx

    def closure_indices(self, point: int) -> np.ndarray:
        """Local indices of the closure of ``point``, each field contiguous."""
        key = (int(point), True)
        idx = self._closure_cache.get(key)
        if idx is None:
            parts: list[int] = []
            for f in range(self.num_fields):
                parts.extend(self._field_closure(point, f))
            idx = np.asarray(parts, dtype=np.int64)
            idx.flags.writeable = False
            self._closure_cache[key] = idx
        return idx

    def field_closure_sizes(self, point: int) -> list[int]:
        return [len(self._field_closure(point, f)) for f in range(self.num_fields)]

    def stratum_closure_indices(self, height: int = 0) -> np.ndarray:
        """``(npoints, closure_size)`` closure indices of a whole height stratum."""
        cached = self._batch_cache.get(height)
        if cached is None:
            start, end = self.mesh.get_height_stratum(height)
            rows = [self.closure_indices(p) for p in range(start, end)]
            if len({len(r) for r in rows}) > 1:
                raise LayoutError("closure sizes differ across the stratum (hybrid mesh)")
            width = len(rows[0]) if rows else 0
            cached = np.array(rows, dtype=np.int64).reshape(end - start, width)
            cached.flags.writeable = False
            self._batch_cache[height] = cached
        return cached

    def dof_locations(self) -> np.ndarray:
        """Geometric location of every local dof (vertex or entity barycenter)."""
        loc = np.zeros((self.size, self.mesh.dim))
        for p in range(self.mesh.num_points):
            if self.dofs[p].sum() == 0:
                continue
            x = self.mesh.point_coordinates(p)
            for f in range(self.num_fields):
                loc[self.point_indices(p, f)] = x
        return loc

    def dof_field_component(self) -> tuple[np.ndarray, np.ndarray]:
        field = np.zeros(self.size, dtype=np.int64)
        comp = np.zeros(self.size, dtype=np.int64)
        for f in range(self.num_fields):
            ncomp = self.components[f]
            for p in np.flatnonzero(self.dofs[:, f]):
                idx = self.point_indices(p, f)
                field[idx] = f
                comp[idx] = np.arange(len(idx)) % ncomp
        return field, comp


def create_section(mesh: MeshPlex, fields) -> Section:
    """Build a section from ``(dofs-per-depth, components)`` pairs or FieldLayouts."""
    layouts = []
    for f in fields:
        if not isinstance(f, FieldLayout):
            dpd, comps = f
            f = FieldLayout(tuple(int(v) for v in dpd), int(comps))
        if len(f.dofs_per_depth) != mesh.dim + 1:
            raise LayoutError(f"dofs-per-depth needs {mesh.dim + 1} entries, got {len(f.dofs_per_depth)}")
        if min(f.dofs_per_depth) < 0 or f.components < 1:
            raise LayoutError("dof counts must be non-negative and components positive")
        layouts.append(f)
    if not layouts:
        raise LayoutError("at least one field is required")
    return Section(mesh, layouts)


def section_for_element(mesh: MeshPlex, element, components: int = 1) -> Section:
    return create_section(mesh, [FieldLayout(element.dofs_per_depth, components, element.name)])


def coordinate_section(mesh: MeshPlex) -> Section:
    return create_section(mesh, [((1,) + (0,) * mesh.dim, mesh.dim)])


def coordinate_vector(mesh: MeshPlex, section: Section | None = None) -> np.ndarray:
    section = section or coordinate_section(mesh)
    vec = np.zeros(section.size)
    start, end = mesh.get_depth_stratum(0)
    offs = section.offsets[start:end, 0]
    for k in range(mesh.dim):
        vec[offs + k] = mesh.coordinates[:, k]
    return vec


def _check_size(section, vec):
    if len(vec) != section.size:
        raise LayoutError(f"local vector has length {len(vec)}, section expects {section.size}")


def vec_get_closure(mesh: MeshPlex, section: Section, vec: np.ndarray, point: int) -> np.ndarray:
    _check_size(section, vec)
    return vec[section.closure_indices(point)]


def vec_set_closure_add(mesh: MeshPlex, section: Section, vec: np.ndarray, point: int, values) -> None:
    _check_size(section, vec)
    idx = section.closure_indices(point)
    values = np.asarray(values, dtype=float)
    if values.shape != idx.shape:
        raise LayoutError(f"closure of point {point} has {len(idx)} dofs, got {values.shape}")
    # closure indices are distinct, so buffered += is exact
    vec[idx] += values


@dataclass(frozen=True, eq=False)
class GlobalMap:
    """Local-to-global numbering with Dirichlet dofs removed.

    ``constrained_*`` arrays describe each constrained local dof: its index,
    geometric location, field and component; they drive boundary insertion.
    """

    local_to_global: np.ndarray
    num_global: int
    constrained: np.ndarray
    constrained_coords: np.ndarray
    constrained_field: np.ndarray
    constrained_component: np.ndarray

    @property
    def num_local(self) -> int:
        return len(self.local_to_global)

    @property
    def unconstrained(self) -> np.ndarray:
        return np.flatnonzero(self.local_to_global != CONSTRAINED)


def create_global_map(section: Section) -> GlobalMap:
    l2g = np.zeros(section.size, dtype=np.int64)
    mask = np.zeros(section.size, dtype=bool)
    mask[section.constrained] = True
    l2g[~mask] = np.arange(int((~mask).sum()))
    l2g[mask] = CONSTRAINED
    c = section.constrained
    if c.size:
        coords = section.dof_locations()[c]
        field, comp = section.dof_field_component()
        field, comp = field[c], comp[c]
    else:
        coords = np.zeros((0, section.mesh.dim))
        field = comp = np.zeros(0, dtype=np.int64)
    for arr in (l2g, c, coords, field, comp):
        arr.flags.writeable = False
    return GlobalMap(l2g, int((~mask).sum()), c, coords, field, comp)


def boundary_points(mesh: MeshPlex) -> np.ndarray:
    """Boundary faces (one supporting cell) together with their closures."""
    pts = set()
    for f in mesh.boundary_faces():
        pts.update(q for q, _ in mesh.transitive_closure(f))
    return np.array(sorted(pts), dtype=np.int64)


def mark_boundary_constrained(mesh: MeshPlex, section: Section, field: int = 0) -> tuple[Section, GlobalMap]:
    if not 0 <= field < section.num_fields:
        raise LayoutError(f"no field {field}")
    idx = [section.point_indices(p, field) for p in boundary_points(mesh)]
    extra = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
    new = section.with_constraints(extra)
    return new, create_global_map(new)


BoundaryValues = Callable[[np.ndarray], np.ndarray]


def _boundary_values(gmap: GlobalMap, bc) -> np.ndarray:
    m = len(gmap.constrained)
    out = np.zeros(m)
    if bc is None or m == 0:
        return out
    funcs: Mapping[int, BoundaryValues] = bc if isinstance(bc, Mapping) else {0: bc}
    for f, func in funcs.items():
        sel = np.flatnonzero(gmap.constrained_field == f)
        if sel.size == 0 or func is None:
            continue
        vals = np.asarray(func(gmap.constrained_coords[sel]), dtype=float)
        if vals.ndim == 2:
            vals = vals[np.arange(len(sel)), gmap.constrained_component[sel]]
        out[sel] = np.broadcast_to(vals, sel.shape)
    return out


def global_to_local(gmap: GlobalMap, section: Section, g: np.ndarray, bc=None) -> np.ndarray:
    """Scatter unknowns into a local vector and fill Dirichlet values from ``bc``.

    ``bc`` maps an ``(m, dim)`` coordinate array to ``(m,)`` or ``(m, ncomp)``
    values; a dict ``{field: bc}`` handles several fields.  ``None`` gives zeros.
    """
    g = np.asarray(g, dtype=float)
    if len(g) != gmap.num_global:
        raise LayoutError(f"global vector has length {len(g)}, expected {gmap.num_global}")
    if section.size != gmap.num_local:
        raise LayoutError("section and global map disagree on the local size")
    local = np.empty(gmap.num_local)
    free = gmap.local_to_global != CONSTRAINED
    local[free] = g[gmap.local_to_global[free]]
    local[gmap.constrained] = _boundary_values(gmap, bc)
    return local


def local_to_global_add(gmap: GlobalMap, l: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Accumulate unconstrained local entries into ``g`` in place; returns ``g``."""
    if len(l) != gmap.num_local or len(g) != gmap.num_global:
        raise LayoutError("vector sizes do not match the global map")
    free = gmap.local_to_global != CONSTRAINED
    g[gmap.local_to_global[free]] += l[free]
    return g
