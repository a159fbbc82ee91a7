"""Manufactured-solution verification: exact solutions, L2 errors, convergence rates."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .assembly import DEFAULT_CHUNK_SIZE, build_problem, mesh_coordinates
from .discretization import Tabulation, chunk_geometry, coordinate_tabulation, default_tabulation
from .layout import Section
from .mesh import MESH_FAMILIES, MeshPlex
from .physics import PointwiseModel, model_poisson
from .solver import newton_solve


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution with its hand-derived forcing ``g = -lap u``."""

    name: str
    exact: Callable[[np.ndarray], np.ndarray]
    forcing: Callable[[np.ndarray], np.ndarray]


def sine_product() -> ManufacturedSolution:
    """u = prod_i sin(pi x_i), so -lap u = dim pi^2 u."""

    def exact(x):
        return np.prod(np.sin(np.pi * x), axis=-1)

    def forcing(x):
        return x.shape[-1] * np.pi**2 * exact(x)

    return ManufacturedSolution("sine", exact, forcing)


def linear_sum() -> ManufacturedSolution:
    return ManufacturedSolution("linear", lambda x: np.sum(x, axis=-1), lambda x: np.zeros(x.shape[:-1]))


def quadratic_sum() -> ManufacturedSolution:
    """u = sum_i x_i^2, so -lap u = -2 dim."""
    return ManufacturedSolution(
        "quadratic",
        lambda x: np.sum(x * x, axis=-1),
        lambda x: np.full(x.shape[:-1], -2.0 * x.shape[-1]),
    )


SOLUTIONS = {"sine": sine_product, "linear": linear_sum, "quadratic": quadratic_sum}


def error_tabulation(element) -> Tabulation:
    """Tabulation two degrees above the solution quadrature."""
    return default_tabulation(element, 2 * element.degree + 2)


def l2_error(mesh: MeshPlex, section: Section, tab: Tabulation, u_h: np.ndarray, exact) -> float:
    """``sqrt(sum_cells sum_q |det J| w (u_h - u)^2)`` for a local vector ``u_h``."""
    if tab.rule.degree < 2 * tab.element.degree + 2:
        raise ValueError(
            f"error quadrature degree {tab.rule.degree} below {2 * tab.element.degree + 2}"
        )
    if len(u_h) != section.size:
        raise ValueError("u_h must be a local vector")
    ncomp = int(section.components[0])
    closure = section.stratum_closure_indices(0)
    cs, coord_vec = mesh_coordinates(mesh)
    cclosure = cs.stratum_closure_indices(0)
    ctab = coordinate_tabulation(tab.rule)
    nv = cclosure.shape[1] // mesh.dim
    total = 0.0
    for start in range(0, mesh.num_cells, DEFAULT_CHUNK_SIZE):
        cells = np.arange(start, min(start + DEFAULT_CHUNK_SIZE, mesh.num_cells))
        coords = coord_vec[cclosure[cells]].reshape(len(cells), nv, mesh.dim)
        geom = chunk_geometry(coords, ctab)
        ue = u_h[closure[cells]].reshape(len(cells), tab.nb, ncomp)
        uq = np.einsum("qi,nic->nqc", tab.B, ue)
        ex = np.asarray(exact(geom.x), dtype=float)
        if ex.ndim == uq.ndim - 1:
            ex = ex[..., None]
        total += float(np.sum(geom.scaling[..., None] * (uq - ex) ** 2))
    return math.sqrt(total)


@dataclass
class Level:
    h: float
    num_global: int
    l2_error: float
    runtime_seconds: float
    newton_iterations: int = 0


@dataclass
class ConvergenceStudy:
    levels: list[Level] = field(default_factory=list)

    @property
    def rates(self) -> list[float]:
        out = []
        for a, b in zip(self.levels, self.levels[1:]):
            if a.l2_error <= 0 or b.l2_error <= 0:
                out.append(float("nan"))
            else:
                out.append(math.log2(a.l2_error / b.l2_error) / math.log2(a.h / b.h))
        return out


def solve_discrete(
    mesh: MeshPlex,
    element: str,
    model: PointwiseModel,
    bc,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
):
    """Solve ``F(u) = 0`` from zero; returns ``(problem, local solution, report)``."""
    problem = build_problem(mesh, element, model, bc, chunk_size=chunk_size, threads=threads)
    u, report = newton_solve(problem, np.zeros(problem.num_global))
    return problem, problem.to_local(u), report


def run_convergence(
    solution: ManufacturedSolution,
    element: str,
    mesh_family: str,
    levels: Sequence[int],
    model_factory: Optional[Callable[[Callable], PointwiseModel]] = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
) -> ConvergenceStudy:
    """Solve on each refinement ``n`` (h = 1/n) and record the L2 error."""
    make_model = model_factory or (lambda g: model_poisson(g))
    if list(levels) != sorted(set(levels)):
        raise ValueError("levels must be strictly increasing")
    build_mesh = MESH_FAMILIES[mesh_family]
    study = ConvergenceStudy()
    for n in levels:
        t0 = time.perf_counter()
        mesh = build_mesh(n)
        model = make_model(solution.forcing)
        problem, u_local, report = solve_discrete(mesh, element, model, solution.exact, chunk_size, threads)
        if not report.converged:
            raise RuntimeError(f"solve did not converge on level n={n}: {report.reason}")
        err = l2_error(mesh, problem.section, error_tabulation(problem.tab.element), u_local, solution.exact)
        study.levels.append(
            Level(1.0 / n, problem.num_global, err, time.perf_counter() - t0, report.iterations)
        )
    return study
