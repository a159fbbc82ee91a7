"""Acceptance criteria 1-11, one marked test group per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from unifem.assembly import (
    PerfCounters,
    apply_assembled,
    apply_jacobian_matrix_free,
    build_problem,
    check_jacobian_fd,
    evaluate_residual,
    report_per_dof,
)
from unifem.discretization import REFERENCE_MEASURE, default_tabulation, lagrange_element, make_quadrature, reference_mesh
from unifem.layout import create_section, vec_get_closure, vec_set_closure_add
from unifem.mesh import MESH_FAMILIES, unit_interval, unit_square_quad, unit_square_tri, unit_cube_tet
from unifem.mms import SOLUTIONS, error_tabulation, l2_error, run_convergence, solve_discrete
from unifem.physics import model_bratu, model_mass_reaction, model_poisson
from unifem.solver import newton_solve

acc = pytest.mark.acceptance

CLOSURE_BY_DEPTH = {
    "segment": [2, 1],
    "triangle": [3, 3, 1],
    "quadrilateral": [4, 4, 1],
    "tetrahedron": [4, 6, 4, 1],
}


def _model(name):
    sol = SOLUTIONS["sine"]()
    return {
        "poisson": lambda: model_poisson(sol.forcing),
        "mass": lambda: model_mass_reaction(1.0, sol.exact),
        "bratu": lambda: model_bratu(2.0),
    }[name]()


# ---------------------------------------------------------------------------
# 1. topology
# ---------------------------------------------------------------------------

def _check_topology(mesh):
    n = mesh.num_points
    # strata: contiguous, disjoint, covering, ordered cells / vertices / edges / faces
    ranges = [mesh.get_depth_stratum(d) for d in range(mesh.dim + 1)]
    covered = np.zeros(n, dtype=int)
    for d, (a, b) in enumerate(ranges):
        assert (mesh.depth[a:b] == d).all()
        covered[a:b] += 1
    assert (covered == 1).all()
    assert mesh.get_height_stratum(0) == (0, mesh.num_cells)
    # cone/support transpose, built from the public accessors
    cone_pairs = np.array([(p, q) for p in range(n) for q, _ in mesh.cone(p)])
    supp_pairs = np.array([(p, q) for q in range(n) for p in mesh.support(q)])
    order_c = np.lexsort(cone_pairs.T[::-1])
    order_s = np.lexsort(supp_pairs.T[::-1])
    assert np.array_equal(cone_pairs[order_c], supp_pairs[order_s])
    # every cone entry drops depth by exactly one
    assert (mesh.depth[cone_pairs[:, 0]] - mesh.depth[cone_pairs[:, 1]] == 1).all()
    # closure sizes and per-depth counts
    for c in range(mesh.num_cells):
        cl = mesh.transitive_closure(c)
        counts = np.bincount(mesh.depth[[p for p, _ in cl]], minlength=mesh.dim + 1)
        assert counts.tolist() == CLOSURE_BY_DEPTH[mesh.shapes[c]]


@acc(1, "topology suite: transpose, closure sizes, strata partition (< 5 s)")
def test_topology_suite():
    t0 = time.perf_counter()
    checked = 0
    for family, build in MESH_FAMILIES.items():
        for n in (1, 2, 3, 4, 8, 16):
            mesh = build(n)
            _check_topology(mesh)
            checked += mesh.num_cells
    elapsed = time.perf_counter() - t0
    print(f"topology: {checked} cells in {elapsed:.2f} s")
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. closure round trip
# ---------------------------------------------------------------------------

ROUND_TRIP_SECTIONS = {
    "P1": lambda m: [((1, 0, 0), 1)],
    "P2": lambda m: [((1, 1, 0), 1)],
    "P1-vector": lambda m: [((1, 0, 0), 2)],
    "P2-vector+P1": lambda m: [((1, 1, 0), 2), ((1, 0, 0), 1)],
}


@acc(2, "closure round trip, 1000 random vectors per section, exact")
@pytest.mark.parametrize("layout", sorted(ROUND_TRIP_SECTIONS))
def test_closure_round_trip(layout):
    mesh = unit_square_tri(4)
    s = create_section(mesh, ROUND_TRIP_SECTIONS[layout](mesh))
    rng = np.random.default_rng(2)
    for _ in range(1000):
        v = rng.standard_normal(s.size)
        c = int(rng.integers(mesh.num_cells))
        vals = vec_get_closure(mesh, s, v, c)
        w = np.zeros(s.size)
        vec_set_closure_add(mesh, s, w, c, vals)
        assert np.array_equal(vec_get_closure(mesh, s, w, c), vals)
        idx = s.closure_indices(c)
        assert np.array_equal(w[idx], v[idx])
        w[idx] = 0.0
        assert not w.any()


# ---------------------------------------------------------------------------
# 3. element oracles
# ---------------------------------------------------------------------------

@acc(3, "P1 stiffness and mass on the reference triangle, <= 1e-14")
@pytest.mark.parametrize(
    "model, expect",
    [
        (model_poisson(), 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]], dtype=float)),
        (model_mass_reaction(1.0), np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]], dtype=float) / 24),
    ],
    ids=["stiffness", "mass"],
)
def test_element_oracles(model, expect):
    pr = build_problem(reference_mesh("triangle"), "P1", model, dirichlet=False)
    A = pr.jacobian(np.zeros(pr.num_global)).to_dense()
    assert np.max(np.abs(A - expect)) <= 1e-14


# ---------------------------------------------------------------------------
# 4. Jacobian vs finite differences
# ---------------------------------------------------------------------------

_T4 = []


@acc(4, "assembled Jacobian vs central differences <= 1e-6 (< 30 s)")
@pytest.mark.parametrize("mesh_name, element", [("tri-square", "P1"), ("quad-square", "Q1")])
@pytest.mark.parametrize("model_name", ["poisson", "mass", "bratu"])
def test_jacobian_consistency(mesh_name, element, model_name):
    t0 = time.perf_counter()
    pr = build_problem(MESH_FAMILIES[mesh_name](4), element, _model(model_name), SOLUTIONS["sine"]().exact)
    u = np.random.default_rng(4).uniform(-0.5, 0.5, pr.num_global)
    rep = check_jacobian_fd(pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, pr.bc, tol=1e-6)
    _T4.append(time.perf_counter() - t0)
    print(f"{model_name}/{mesh_name}: max rel err {rep.max_rel_error:.2e} over {rep.columns_checked} columns")
    assert rep.columns_checked == pr.num_global
    assert rep.passed
    assert sum(_T4) < 30.0


# ---------------------------------------------------------------------------
# 5. matrix-free equivalence
# ---------------------------------------------------------------------------

MF_MESHES = {
    "interval-P2": (lambda: unit_interval(16), "P2"),
    "tri-P1": (lambda: unit_square_tri(6), "P1"),
    "tri-P2": (lambda: unit_square_tri(6), "P2"),
    "quad-Q1": (lambda: unit_square_quad(6), "Q1"),
    "tet-P1": (lambda: unit_cube_tet(3), "P1"),
}


@acc(5, "matrix-free apply equals assembled apply, rel <= 1e-12, 20 vectors")
@pytest.mark.parametrize("case", sorted(MF_MESHES))
@pytest.mark.parametrize("model_name", ["poisson", "mass", "bratu"])
def test_matrix_free_equivalence(case, model_name):
    build, element = MF_MESHES[case]
    pr = build_problem(build(), element, _model(model_name), SOLUTIONS["sine"]().exact)
    rng = np.random.default_rng(5)
    u = rng.uniform(-0.5, 0.5, pr.num_global)
    A = pr.jacobian(u)
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal(pr.num_global)
        ax = A.matvec(x)
        worst = max(worst, np.linalg.norm(ax - pr.apply_jacobian(u, x)) / np.linalg.norm(ax))
    assert worst <= 1e-12


# ---------------------------------------------------------------------------
# 6. chunk invariance
# ---------------------------------------------------------------------------

@acc(6, "residual bitwise identical for chunk sizes {1, 7, 64, nC}")
@pytest.mark.parametrize("case", sorted(MF_MESHES))
@pytest.mark.parametrize("model_name", ["poisson", "bratu"])
def test_chunk_invariance(case, model_name):
    build, element = MF_MESHES[case]
    pr = build_problem(build(), element, _model(model_name), SOLUTIONS["sine"]().exact)
    u = np.random.default_rng(6).standard_normal(pr.num_global)
    results = []
    for chunk in (1, 7, 64, pr.mesh.num_cells):
        results.append(
            evaluate_residual(pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, pr.bc,
                              chunk_size=chunk, counters=PerfCounters())
        )
    for r in results[1:]:
        assert np.array_equal(r.view(np.uint64), results[0].view(np.uint64))


# ---------------------------------------------------------------------------
# 7. MMS convergence
# ---------------------------------------------------------------------------

_T7 = []


@acc(7, "MMS rates P1 2.0+-0.15, P2 3.0+-0.2, Q1 2.0+-0.15 (< 60 s)")
@pytest.mark.parametrize(
    "element, family, rate, tol",
    [("P1", "tri-square", 2.0, 0.15), ("P2", "tri-square", 3.0, 0.2), ("Q1", "quad-square", 2.0, 0.15)],
)
def test_mms_convergence(element, family, rate, tol):
    t0 = time.perf_counter()
    study = run_convergence(SOLUTIONS["sine"](), element, family, [8, 16, 32])
    _T7.append(time.perf_counter() - t0)
    errs = [f"{lvl.l2_error:.3e}" for lvl in study.levels]
    print(f"{element}: errors {errs} rates {[round(r, 4) for r in study.rates]}")
    assert abs(study.rates[-1] - rate) <= tol
    assert sum(_T7) < 60.0


# ---------------------------------------------------------------------------
# 8. Galerkin exactness
# ---------------------------------------------------------------------------

@acc(8, "Galerkin exactness, l2 error <= 1e-10")
@pytest.mark.parametrize("element, name", [("P1", "linear"), ("P2", "quadratic")])
@pytest.mark.parametrize("n", [1, 4, 7])
def test_galerkin_exactness(element, name, n):
    sol = SOLUTIONS[name]()
    mesh = unit_square_tri(n)
    pr, u, rep = solve_discrete(mesh, element, model_poisson(sol.forcing), sol.exact)
    assert rep.converged
    assert l2_error(mesh, pr.section, error_tabulation(pr.tab.element), u, sol.exact) <= 1e-10


# ---------------------------------------------------------------------------
# 9. Newton
# ---------------------------------------------------------------------------

@acc(9, "Newton: one step when linear; Bratu lambda=2 in <= 6 steps, quadratic")
@pytest.mark.parametrize("element, mesh_name", [("P1", "tri-square"), ("P2", "tri-square"), ("Q1", "quad-square"), ("P1", "tet-cube")])
@pytest.mark.parametrize("model_name", ["poisson", "mass"])
def test_newton_linear(element, mesh_name, model_name):
    pr = build_problem(MESH_FAMILIES[mesh_name](4), element, _model(model_name), SOLUTIONS["sine"]().exact)
    _, rep = newton_solve(pr, np.zeros(pr.num_global))
    assert rep.converged and rep.iterations == 1


@acc(9, "Newton: one step when linear; Bratu lambda=2 in <= 6 steps, quadratic")
@pytest.mark.parametrize("element, mesh_name", [("P1", "tri-square"), ("P2", "tri-square"), ("Q1", "quad-square")])
def test_newton_bratu(element, mesh_name):
    pr = build_problem(MESH_FAMILIES[mesh_name](16), element, model_bratu(2.0))
    u, rep = newton_solve(pr, np.zeros(pr.num_global))
    r = rep.residual_norms
    print(f"bratu {element}: |F| = {[f'{v:.2e}' for v in r]}")
    assert rep.converged and rep.iterations <= 6
    assert r[-1] <= 1e-10
    # r_{k+1} / r_k^2 stays bounded over the final steps; a step that lands on
    # the round-off floor measures rounding, not the contraction
    floor = 1e3 * np.finfo(float).eps * max(r[0], 1.0)
    ratios = [b / a**2 for a, b in zip(r[1:-1], r[2:]) if b > floor]
    assert ratios and max(ratios) <= 1.0
    assert all(b < a for a, b in zip(r, r[1:]))


# ---------------------------------------------------------------------------
# 10. conservation / normalization
# ---------------------------------------------------------------------------

@acc(10, "mass total = |Omega| +- 1e-12; partition of unity; weight sums")
@pytest.mark.parametrize(
    "build, element",
    [
        (lambda: unit_interval(9), "P1"),
        (lambda: unit_interval(9), "P2"),
        (lambda: unit_square_tri(5), "P1"),
        (lambda: unit_square_tri(5), "P2"),
        (lambda: unit_square_quad(5), "Q1"),
        (lambda: unit_cube_tet(3), "P1"),
    ],
)
def test_mass_matrix_total(build, element):
    pr = build_problem(build(), element, model_mass_reaction(1.0), dirichlet=False)
    M = pr.jacobian(np.zeros(pr.num_global))
    assert abs(M.data.sum() - 1.0) <= 1e-12


@acc(10, "mass total = |Omega| +- 1e-12; partition of unity; weight sums")
@pytest.mark.parametrize(
    "name, shape",
    [("P1", "segment"), ("P2", "segment"), ("P1", "triangle"), ("P2", "triangle"), ("Q1", "quadrilateral"), ("P1", "tetrahedron")],
)
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 8])
def test_normalization(name, shape, degree):
    rule = make_quadrature(shape, degree)
    assert abs(rule.weights.sum() - REFERENCE_MEASURE[shape]) <= 1e-14
    tab = default_tabulation(lagrange_element(name, shape), degree)
    assert np.max(np.abs(tab.B.sum(axis=1) - 1.0)) <= 1e-14
    assert np.max(np.abs(tab.D.sum(axis=1))) <= 1e-13


# ---------------------------------------------------------------------------
# 11. perf contrast
# ---------------------------------------------------------------------------

@acc(11, "matrix-free apply: fewer bytes/dof, more flops/dof than assembled (P2, n=32)")
def test_perf_contrast():
    pr = build_problem(unit_square_tri(32), "P2", model_poisson(SOLUTIONS["sine"]().forcing))
    rng = np.random.default_rng(11)
    u = rng.standard_normal(pr.num_global)
    x = rng.standard_normal(pr.num_global)
    A = pr.jacobian(u)
    ca, cm = PerfCounters(), PerfCounters()
    ya = apply_assembled(A, x, counters=ca)
    ym = apply_jacobian_matrix_free(pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, x, pr.bc, counters=cm)
    assert np.linalg.norm(ya - ym) <= 1e-12 * np.linalg.norm(ya)
    fa, ba = report_per_dof(ca, pr.num_global)
    fm, bm = report_per_dof(cm, pr.num_global)
    print(f"assembled: {fa:.1f} flops/dof {ba:.1f} bytes/dof; matrix-free: {fm:.1f} flops/dof {bm:.1f} bytes/dof")
    assert bm < ba
    assert fm > fa


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
