"""Chunked residual and Jacobian evaluation over a mesh.

The library owns the traversal: cells are gathered chunk by chunk through
their closures, interpolated to quadrature points, handed to the pointwise
model, and integrated back against the basis.  Per-cell arithmetic uses a
fixed loop order (quadrature point, then basis function) and element
vectors are added to the local residual in ascending cell order, so the
result does not depend on the chunk size, bit for bit.
"""

from __future__ import annotations

import copy
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .discretization import (
    CellGeometry,
    Tabulation,
    chunk_geometry,
    coordinate_tabulation,
    default_tabulation,
    lagrange_element,
    tabulate,
)
from .layout import (
    CONSTRAINED,
    GlobalMap,
    Section,
    coordinate_section,
    coordinate_vector,
    create_global_map,
    global_to_local,
    local_to_global_add,
    mark_boundary_constrained,
    section_for_element,
)
from .mesh import MeshPlex
from .physics import PointValues, PointwiseModel

DEFAULT_CHUNK_SIZE = 32
FLOAT_BYTES = 8
INDEX_BYTES = 4


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# counters
# ---------------------------------------------------------------------------

@dataclass
class PerfCounters:
    """Model-level operation counts.

    ``flops`` are attributed by formula per kernel (see the module functions);
    ``bytes_moved`` counts float loads and stores of coefficient, geometry and
    result arrays.  Closure index maps are topology and are not charged to
    the matrix-free kernels; CSR index arrays are the assembled matrix itself
    and are charged to it.
    """

    flops: int = 0
    bytes_moved: int = 0
    cells_processed: int = 0
    chunks_processed: int = 0

    def reset(self) -> None:
        self.flops = self.bytes_moved = self.cells_processed = self.chunks_processed = 0


_COUNTERS = PerfCounters()


def counters_snapshot() -> PerfCounters:
    return copy.copy(_COUNTERS)


def reset_counters() -> None:
    _COUNTERS.reset()


def report_per_dof(counters: PerfCounters, num_global: int) -> tuple[float, float]:
    if num_global <= 0:
        raise ValueError("num_global must be positive")
    return counters.flops / num_global, counters.bytes_moved / num_global


def residual_kernel_flops(tab: Tabulation, ncomp: int, model: PointwiseModel) -> int:
    """Per-cell flops: interpolation and integration with B and D, plus the model."""
    nq, nb, dim = tab.nq, tab.nb, tab.dim
    return 2 * nq * nb * ncomp * (1 + dim) * 2 + nq * model.residual_flops


def matrix_free_kernel_flops(tab: Tabulation, ncomp: int, model: PointwiseModel) -> int:
    """Per-cell flops: interpolate state and direction, apply blocks, integrate."""
    nq, nb, dim = tab.nq, tab.nb, tab.dim
    width = ncomp * (1 + dim)
    return 3 * (2 * nq * nb * width) + nq * (2 * width * width + model.jacobian_flops)


# ---------------------------------------------------------------------------
# workspace and kernels
# ---------------------------------------------------------------------------

class ChunkWorkspace:
    """Contiguous per-chunk buffers, allocated once and reused."""

    def __init__(self, chunk_size: int, nq: int, nb: int, ncomp: int, dim: int):
        self.chunk_size = chunk_size
        self.shape = (chunk_size, nq, nb, ncomp, dim)
        self.u_e = np.zeros((chunk_size, nb, ncomp))
        self.u_q = np.zeros((chunk_size, nq, ncomp))
        self.grad_u_q = np.zeros((chunk_size, nq, ncomp, dim))
        self.f0_q = np.zeros((chunk_size, nq, ncomp))
        self.f1_q = np.zeros((chunk_size, nq, ncomp, dim))
        self.f_e = np.zeros((chunk_size, nb, ncomp))

    @classmethod
    def for_tabulation(cls, chunk_size: int, tab: Tabulation, ncomp: int) -> "ChunkWorkspace":
        return cls(chunk_size, tab.nq, tab.nb, ncomp, tab.dim)


@dataclass(frozen=True, eq=False)
class ChunkGeometry:
    """Cell geometry plus basis data pulled back to physical space."""

    cell: CellGeometry
    Dp: np.ndarray  # (n, nq, nb, dim) physical basis gradients
    BW: np.ndarray  # (n, nq, nb) basis values times |det J| w
    DW: np.ndarray  # (n, nq, nb, dim) physical gradients times |det J| w


def physical_gradients(D: np.ndarray, Jinv: np.ndarray) -> np.ndarray:
    nq, nb, dim = D.shape
    n = Jinv.shape[0]
    Dp = np.zeros((n, nq, nb, dim))
    for d in range(dim):
        Dp += D[None, :, :, d, None] * Jinv[:, :, None, d, :]
    return Dp


def prepare_geometry(cell: CellGeometry, tab: Tabulation) -> ChunkGeometry:
    Dp = physical_gradients(tab.D, cell.Jinv)
    s = cell.scaling
    return ChunkGeometry(cell=cell, Dp=Dp, BW=tab.B[None] * s[:, :, None], DW=Dp * s[:, :, None, None])


def interpolate(B: np.ndarray, Dp: np.ndarray, ue: np.ndarray, out_u=None, out_g=None):
    """Values ``(n, nq, c)`` and physical gradients ``(n, nq, c, dim)`` from coefficients."""
    n, nb, c = ue.shape
    nq, dim = B.shape[0], Dp.shape[-1]
    uq = np.zeros((n, nq, c)) if out_u is None else out_u
    gq = np.zeros((n, nq, c, dim)) if out_g is None else out_g
    uq[...] = 0.0
    gq[...] = 0.0
    for i in range(nb):
        uq += B[None, :, i, None] * ue[:, None, i, :]
        gq += ue[:, None, i, :, None] * Dp[:, :, i, None, :]
    return uq, gq


def integrate(BW: np.ndarray, DW: np.ndarray, g0: np.ndarray, g1: np.ndarray, out=None) -> np.ndarray:
    """Element vectors ``B^T W g0 + sum_d D_d^T W g1_d``; quadrature points outer."""
    n, nq, nb = BW.shape
    c, dim = g1.shape[-2:]
    fe = np.zeros((n, nb, c)) if out is None else out
    fe[...] = 0.0
    for q in range(nq):
        fe += BW[:, q, :, None] * g0[:, q, None, :]
        for e in range(dim):
            fe += DW[:, q, :, e, None] * g1[:, q, None, :, e]
    return fe


@dataclass(frozen=True, eq=False)
class AuxField:
    """Auxiliary coefficients: a section, its tabulation on the same rule, local values."""

    section: Section
    tab: Tabulation
    values: np.ndarray

    @property
    def ncomp(self) -> int:
        return int(self.section.components[0])


def interpolate_aux(mesh: MeshPlex, element: str, func, rule) -> AuxField:
    """Nodal interpolant of ``func`` as an auxiliary field tabulated on ``rule``."""
    elem = lagrange_element(element, mesh.cell_shape)
    section = section_for_element(mesh, elem)
    values = np.asarray(func(section.dof_locations()), dtype=float).reshape(section.size)
    return AuxField(section, tabulate(elem, rule), values)


def _aux_at_points(aux: Optional[AuxField], cells: np.ndarray, geom: ChunkGeometry):
    if aux is None:
        return None, None
    idx = aux.section.stratum_closure_indices(0)[cells]
    ae = aux.values[idx].reshape(len(cells), aux.tab.nb, aux.ncomp)
    Dp = physical_gradients(aux.tab.D, geom.cell.Jinv)
    return interpolate(aux.tab.B, Dp, ae)


def integrate_residual_chunk(
    cells: np.ndarray,
    workspace: ChunkWorkspace,
    tab: Tabulation,
    geoms: ChunkGeometry,
    model: PointwiseModel,
    aux: Optional[AuxField] = None,
) -> np.ndarray:
    """Element residual vectors for a chunk; ``workspace.u_e`` must hold the coefficients.

    Returns a ``(n, nb, c)`` view of ``workspace.f_e``.
    """
    n = len(cells)
    ue = workspace.u_e[:n]
    uq, gq = interpolate(tab.B, geoms.Dp, ue, workspace.u_q[:n], workspace.grad_u_q[:n])
    a, grad_a = _aux_at_points(aux, cells, geoms)
    pv = PointValues(x=geoms.cell.x, u=uq, grad_u=gq, a=a, grad_a=grad_a)
    f0 = workspace.f0_q[:n]
    f1 = workspace.f1_q[:n]
    f0[...] = model.f0(pv)
    f1[...] = model.f1(pv)
    return integrate(geoms.BW, geoms.DW, f0, f1, out=workspace.f_e[:n])


# ---------------------------------------------------------------------------
# mesh-level drivers
# ---------------------------------------------------------------------------

_COORDS: "weakref.WeakKeyDictionary[MeshPlex, tuple]" = weakref.WeakKeyDictionary()


def mesh_coordinates(mesh: MeshPlex) -> tuple[Section, np.ndarray]:
    """Coordinate section and local coordinate vector, built once per mesh."""
    hit = _COORDS.get(mesh)
    if hit is None:
        cs = coordinate_section(mesh)
        hit = (cs, coordinate_vector(mesh, cs))
        _COORDS[mesh] = hit
    return hit


def _chunks(num_cells: int, chunk_size: int):
    if chunk_size < 1:
        raise AssemblyError(f"chunk_size must be >= 1, got {chunk_size}")
    for start in range(0, num_cells, chunk_size):
        yield np.arange(start, min(start + chunk_size, num_cells))


class _Traversal:
    """Shared gather machinery for one (mesh, section, tabulation) triple."""

    def __init__(self, mesh, section, tab, model, aux=None):
        if section.num_fields != 1:
            raise AssemblyError("assembly handles a single (possibly vector) field")
        ncomp = int(section.components[0])
        if ncomp != model.n_components:
            raise AssemblyError(f"section has {ncomp} components, model expects {model.n_components}")
        if tab.element.shape != mesh.cell_shape or tab.dim != mesh.dim:
            raise AssemblyError("tabulation does not match the mesh cell shape")
        if model.n_aux and aux is None:
            raise AssemblyError(f"model {model.name} needs {model.n_aux} auxiliary field(s)")
        if aux is not None and aux.tab.rule is not tab.rule:
            raise AssemblyError("auxiliary tabulation must use the solution quadrature rule")
        self.mesh, self.section, self.tab, self.model, self.aux = mesh, section, tab, model, aux
        self.ncomp = ncomp
        self.closure = section.stratum_closure_indices(0)
        if mesh.num_cells and self.closure.shape[1] != tab.nb * ncomp:
            raise AssemblyError(
                f"closure holds {self.closure.shape[1]} dofs, element needs {tab.nb * ncomp}"
            )
        cs, self.coord_vec = mesh_coordinates(mesh)
        self.coord_closure = cs.stratum_closure_indices(0)
        self.coord_tab = coordinate_tabulation(tab.rule)
        self.nv = self.coord_closure.shape[1] // mesh.dim

    def geometry(self, cells):
        coords_e = self.coord_vec[self.coord_closure[cells]].reshape(len(cells), self.nv, self.mesh.dim)
        return prepare_geometry(chunk_geometry(coords_e, self.coord_tab), self.tab)

    def gather(self, local, cells, out=None):
        vals = local[self.closure[cells]]
        shaped = vals.reshape(len(cells), self.tab.nb, self.ncomp)
        if out is None:
            return shaped
        out[...] = shaped
        return out

    def scatter(self, local, cells, fe):
        # np.add.at applies additions in order: cells ascending, closure order within a cell
        np.add.at(local, self.closure[cells].ravel(), fe.reshape(-1))

    def cell_input_bytes(self):
        aux = self.aux.tab.nb * self.aux.ncomp if self.aux is not None else 0
        return FLOAT_BYTES * (self.nv * self.mesh.dim + aux)


def _counters(counters):
    return _COUNTERS if counters is None else counters


def evaluate_residual(
    mesh: MeshPlex,
    section: Section,
    gmap: GlobalMap,
    tab: Tabulation,
    model: PointwiseModel,
    u_global: np.ndarray,
    bc=None,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    aux: Optional[AuxField] = None,
    counters: Optional[PerfCounters] = None,
    threads: int = 1,
) -> np.ndarray:
    """Global residual F(u): global-to-local with boundary values, chunked
    integration, ordered insertion, local-to-global accumulation."""
    trav = _Traversal(mesh, section, tab, model, aux)
    local = global_to_local(gmap, section, u_global, bc)
    f_local = np.zeros(section.size)
    ctr = _counters(counters)
    nbc = tab.nb * trav.ncomp

    def work(cells, ws):
        trav.gather(local, cells, ws.u_e[: len(cells)])
        geoms = trav.geometry(cells)
        return integrate_residual_chunk(cells, ws, tab, geoms, model, aux)

    chunks = list(_chunks(mesh.num_cells, chunk_size))
    if threads > 1 and len(chunks) > 1:
        def private(cells):
            ws = ChunkWorkspace.for_tabulation(len(cells), tab, trav.ncomp)
            return work(cells, ws).copy()

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(private, chunks))
    else:
        ws = ChunkWorkspace.for_tabulation(min(chunk_size, max(mesh.num_cells, 1)), tab, trav.ncomp)
        results = (work(cells, ws) for cells in chunks)

    per_cell_flops = residual_kernel_flops(tab, trav.ncomp, model)
    per_cell_bytes = FLOAT_BYTES * 3 * nbc + trav.cell_input_bytes()
    for cells, fe in zip(chunks, results):
        trav.scatter(f_local, cells, fe)
        n = len(cells)
        ctr.flops += n * per_cell_flops
        ctr.bytes_moved += n * per_cell_bytes
        ctr.cells_processed += n
        ctr.chunks_processed += 1

    f_global = np.zeros(gmap.num_global)
    return local_to_global_add(gmap, f_local, f_global)


# ---------------------------------------------------------------------------
# sparse matrices and Jacobians
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SparseMatrix:
    """Square CSR matrix with sorted column indices in every row."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n: int
    _csr: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @classmethod
    def from_scipy(cls, A) -> "SparseMatrix":
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr.copy(), A.indices.copy(), A.data.copy(), A.shape[0])

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))
        return self._csr

    @property
    def nnz(self) -> int:
        return len(self.data)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ x

    def write_triplets(self, fh) -> None:
        """``row col value`` per stored entry, values with 17 significant digits."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        for r, c, v in zip(rows, self.indices, self.data):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_triplets(fh, n: int) -> SparseMatrix:
    rows, cols, vals = [], [], []
    for line in fh:
        if line.strip():
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    return SparseMatrix.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def apply_assembled(A: SparseMatrix, x: np.ndarray, counters: Optional[PerfCounters] = None) -> np.ndarray:
    """``A @ x`` with CSR traffic counted: values, column indices, row offsets, x, y."""
    ctr = _counters(counters)
    ctr.flops += 2 * A.nnz
    ctr.bytes_moved += (FLOAT_BYTES + INDEX_BYTES) * A.nnz + INDEX_BYTES * (A.n + 1) + 2 * FLOAT_BYTES * A.n
    return A.matvec(x)


def _blocks_at(model, pv, n, nq, c, dim):
    """Jacobian blocks broadcast to full shapes; missing blocks stay ``None``."""
    shapes = {
        "f00": (n, nq, c, c),
        "f01": (n, nq, c, c, dim),
        "f10": (n, nq, c, dim, c),
        "f11": (n, nq, c, dim, c, dim),
    }
    out = {}
    for name, shape in shapes.items():
        val = model.block(name, pv)
        out[name] = None if val is None else np.broadcast_to(val, shape)
    return out


def element_matrices(
    cells, trav: "_Traversal", local: np.ndarray
) -> np.ndarray:
    """Element Jacobians ``(n, nb*c, nb*c)`` ordered like the closure."""
    tab, model = trav.tab, trav.model
    n, nq, nb, c, dim = len(cells), tab.nq, tab.nb, trav.ncomp, tab.dim
    geoms = trav.geometry(cells)
    ue = trav.gather(local, cells)
    uq, gq = interpolate(tab.B, geoms.Dp, ue)
    a, grad_a = _aux_at_points(trav.aux, cells, geoms)
    pv = PointValues(x=geoms.cell.x, u=uq, grad_u=gq, a=a, grad_a=grad_a)
    blk = _blocks_at(model, pv, n, nq, c, dim)
    K = np.zeros((n, nb, c, nb, c))
    B = tab.B
    if blk["f00"] is not None:
        K += np.einsum("nqi,nqkl,qj->nikjl", geoms.BW, blk["f00"], B)
    if blk["f01"] is not None:
        K += np.einsum("nqi,nqklf,nqjf->nikjl", geoms.BW, blk["f01"], geoms.Dp)
    if blk["f10"] is not None:
        K += np.einsum("nqie,nqkel,qj->nikjl", geoms.DW, blk["f10"], B)
    if blk["f11"] is not None:
        K += np.einsum("nqie,nqkelf,nqjf->nikjl", geoms.DW, blk["f11"], geoms.Dp)
    return K.reshape(n, nb * c, nb * c)


def assemble_jacobian(
    mesh: MeshPlex,
    section: Section,
    gmap: GlobalMap,
    tab: Tabulation,
    model: PointwiseModel,
    u_global: np.ndarray,
    bc=None,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    aux: Optional[AuxField] = None,
    counters: Optional[PerfCounters] = None,
) -> SparseMatrix:
    """Assembled F'(u) on the unknowns; constrained rows and columns are dropped."""
    if not model.has_jacobian:
        raise AssemblyError(f"model {model.name} provides no Jacobian blocks")
    trav = _Traversal(mesh, section, tab, model, aux)
    local = global_to_local(gmap, section, u_global, bc)
    rows, cols, vals = [], [], []
    ctr = _counters(counters)
    for cells in _chunks(mesh.num_cells, chunk_size):
        Ke = element_matrices(cells, trav, local)
        g = gmap.local_to_global[trav.closure[cells]]  # (n, nbc)
        R = np.broadcast_to(g[:, :, None], Ke.shape)
        C = np.broadcast_to(g[:, None, :], Ke.shape)
        keep = (R != CONSTRAINED) & (C != CONSTRAINED)
        rows.append(R[keep])
        cols.append(C[keep])
        vals.append(Ke[keep])
        ctr.cells_processed += len(cells)
        ctr.chunks_processed += 1
    n = gmap.num_global
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    # coo -> csr sums duplicates and keeps explicit zeros, preserving the full closure pattern
    return SparseMatrix.from_scipy(sp.coo_matrix((v, (r, c)), shape=(n, n)))


def apply_jacobian_matrix_free(
    mesh: MeshPlex,
    section: Section,
    gmap: GlobalMap,
    tab: Tabulation,
    model: PointwiseModel,
    u_global: np.ndarray,
    x_global: np.ndarray,
    bc=None,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    aux: Optional[AuxField] = None,
    counters: Optional[PerfCounters] = None,
) -> np.ndarray:
    """y = F'(u) x without forming the matrix.

    The direction ``x`` carries zeros on constrained dofs, since boundary
    values do not vary with the unknowns.
    """
    if not model.has_jacobian:
        raise AssemblyError(f"model {model.name} provides no Jacobian blocks")
    trav = _Traversal(mesh, section, tab, model, aux)
    u_local = global_to_local(gmap, section, u_global, bc)
    x_local = global_to_local(gmap, section, x_global, None)
    y_local = np.zeros(section.size)
    ctr = _counters(counters)
    c, dim = trav.ncomp, tab.dim
    nbc = tab.nb * c
    per_cell_flops = matrix_free_kernel_flops(tab, c, model)
    # state in, direction in, geometry in, element result read-modify-write
    per_cell_bytes = FLOAT_BYTES * 4 * nbc + trav.cell_input_bytes()
    for cells in _chunks(mesh.num_cells, chunk_size):
        n = len(cells)
        geoms = trav.geometry(cells)
        uq, gq = interpolate(tab.B, geoms.Dp, trav.gather(u_local, cells))
        xq, gx = interpolate(tab.B, geoms.Dp, trav.gather(x_local, cells))
        a, grad_a = _aux_at_points(aux, cells, geoms)
        pv = PointValues(x=geoms.cell.x, u=uq, grad_u=gq, a=a, grad_a=grad_a)
        blk = _blocks_at(model, pv, n, tab.nq, c, dim)
        g0 = np.zeros((n, tab.nq, c))
        g1 = np.zeros((n, tab.nq, c, dim))
        if blk["f00"] is not None:
            g0 += np.einsum("nqkl,nql->nqk", blk["f00"], xq)
        if blk["f01"] is not None:
            g0 += np.einsum("nqklf,nqlf->nqk", blk["f01"], gx)
        if blk["f10"] is not None:
            g1 += np.einsum("nqkel,nql->nqke", blk["f10"], xq)
        if blk["f11"] is not None:
            g1 += np.einsum("nqkelf,nqlf->nqke", blk["f11"], gx)
        ye = integrate(geoms.BW, geoms.DW, g0, g1)
        trav.scatter(y_local, cells, ye)
        ctr.flops += n * per_cell_flops
        ctr.bytes_moved += n * per_cell_bytes
        ctr.cells_processed += n
        ctr.chunks_processed += 1
    y = np.zeros(gmap.num_global)
    return local_to_global_add(gmap, y_local, y)


@dataclass
class JacobianCheck:
    max_rel_error: float
    worst_column: int
    columns_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def check_jacobian_fd(
    mesh: MeshPlex,
    section: Section,
    gmap: GlobalMap,
    tab: Tabulation,
    model: PointwiseModel,
    u_global: np.ndarray,
    bc=None,
    samples: Optional[int] = None,
    *,
    seed: int = 0,
    tol: float = 1e-6,
    aux: Optional[AuxField] = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> JacobianCheck:
    """Compare assembled Jacobian columns with central differences of the residual.

    Step ``1e-6 * (max|u| + 1)``; per column the error is
    ``max|col_fd - col_A| / max|col_A|``.  ``samples=None`` checks every column.
    """
    u = np.asarray(u_global, dtype=float)
    kw = dict(chunk_size=chunk_size, aux=aux, counters=PerfCounters())
    A = assemble_jacobian(mesh, section, gmap, tab, model, u, bc, **kw).to_scipy().tocsc()
    n = gmap.num_global
    if samples is None or samples >= n:
        columns = np.arange(n)
    else:
        columns = np.sort(np.random.default_rng(seed).choice(n, size=samples, replace=False))
    h = 1e-6 * (np.max(np.abs(u), initial=0.0) + 1.0)
    worst, worst_col = 0.0, -1
    for j in columns:
        e = np.zeros(n)
        e[j] = h
        fp = evaluate_residual(mesh, section, gmap, tab, model, u + e, bc, **kw)
        fm = evaluate_residual(mesh, section, gmap, tab, model, u - e, bc, **kw)
        fd = (fp - fm) / (2 * h)
        col = A[:, j].toarray().ravel()
        scale = np.max(np.abs(col), initial=0.0)
        diff = np.max(np.abs(fd - col), initial=0.0)
        err = diff / scale if scale > 0 else diff
        if not err <= worst:
            worst, worst_col = err, int(j)
    return JacobianCheck(float(worst), worst_col, len(columns), tol)


# ---------------------------------------------------------------------------
# problem bundle
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DiscreteProblem:
    """Everything needed to evaluate F and F' for one discretized model."""

    mesh: MeshPlex
    section: Section
    gmap: GlobalMap
    tab: Tabulation
    model: PointwiseModel
    bc: object = None
    aux: Optional[AuxField] = None
    chunk_size: int = DEFAULT_CHUNK_SIZE
    threads: int = 1
    counters: Optional[PerfCounters] = None

    @property
    def num_global(self) -> int:
        return self.gmap.num_global

    @property
    def spd(self) -> bool:
        return self.model.spd

    def _kw(self):
        return dict(chunk_size=self.chunk_size, aux=self.aux, counters=self.counters)

    def residual(self, u: np.ndarray) -> np.ndarray:
        return evaluate_residual(
            self.mesh, self.section, self.gmap, self.tab, self.model, u, self.bc,
            threads=self.threads, **self._kw(),
        )

    def jacobian(self, u: np.ndarray) -> SparseMatrix:
        return assemble_jacobian(self.mesh, self.section, self.gmap, self.tab, self.model, u, self.bc, **self._kw())

    def apply_jacobian(self, u: np.ndarray, x: np.ndarray) -> np.ndarray:
        return apply_jacobian_matrix_free(
            self.mesh, self.section, self.gmap, self.tab, self.model, u, x, self.bc, **self._kw()
        )

    def to_local(self, u: np.ndarray) -> np.ndarray:
        return global_to_local(self.gmap, self.section, u, self.bc)


def build_problem(
    mesh: MeshPlex,
    element: str,
    model: PointwiseModel,
    bc=None,
    *,
    dirichlet: bool = True,
    quad_degree: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    aux: Optional[AuxField] = None,
    threads: int = 1,
) -> DiscreteProblem:
    """Section, boundary constraints and tabulation for ``element`` on ``mesh``."""
    elem = lagrange_element(element, mesh.cell_shape)
    section = section_for_element(mesh, elem, model.n_components)
    if dirichlet:
        section, gmap = mark_boundary_constrained(mesh, section)
    else:
        gmap = create_global_map(section)
    tab = default_tabulation(elem, quad_degree)
    return DiscreteProblem(mesh, section, gmap, tab, model, bc, aux, chunk_size, threads)
