import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unifem.discretization import lagrange_element
from unifem.layout import (
    CONSTRAINED,
    FieldLayout,
    LayoutError,
    create_global_map,
    create_section,
    global_to_local,
    local_to_global_add,
    mark_boundary_constrained,
    section_for_element,
    vec_get_closure,
    vec_set_closure_add,
)
from unifem.mesh import unit_cube_tet, unit_interval, unit_square_quad, unit_square_tri


def p1(mesh, comps=1):
    return ((1,) + (0,) * mesh.dim, comps)


def p2(mesh, comps=1):
    return ((1, 1) + (0,) * (mesh.dim - 1), comps)


def test_offsets_are_exclusive_prefix_sum():
    m = unit_square_tri(2)
    s = create_section(m, [p2(m, 2), p1(m)])
    flat = s.dofs.ravel()
    np.testing.assert_array_equal(s.offsets.ravel(), np.concatenate([[0], np.cumsum(flat)[:-1]]))
    assert s.size == 2 * (9 + 16) + 9


@pytest.mark.parametrize(
    "mesh, fields, size",
    [
        (unit_square_tri(2), lambda m: [p1(m)], 3),
        (unit_square_tri(2), lambda m: [p2(m)], 6),
        (unit_square_quad(2), lambda m: [p1(m, 2)], 8),
        (unit_cube_tet(1), lambda m: [p1(m)], 4),
        (unit_interval(3), lambda m: [p2(m)], 3),
    ],
)
def test_closure_size(mesh, fields, size):
    s = create_section(mesh, fields(mesh))
    for c in range(mesh.num_cells):
        idx = s.closure_indices(c)
        assert len(idx) == size and len(set(idx.tolist())) == size


def test_multifield_closure_is_field_contiguous():
    m = unit_square_tri(1)
    s = create_section(m, [p2(m, 2), p1(m)])
    assert s.field_closure_sizes(0) == [12, 3]
    idx = s.closure_indices(0)
    # the last three indices belong to the scalar field
    field = np.zeros(s.size, dtype=int)
    for p in range(m.num_points):
        field[s.point_indices(p, 1)] = 1
    np.testing.assert_array_equal(field[idx], [0] * 12 + [1] * 3)


def test_edge_nodes_reverse_with_orientation():
    # two nodes per edge: the shared edge is traversed in opposite directions
    m = unit_square_tri(1)
    s = create_section(m, [((1, 2, 0), 1)])
    e0, e1 = m.get_depth_stratum(1)
    shared = [e for e in range(e0, e1) if m.support_size(e) == 2]
    assert len(shared) == 1
    e = shared[0]
    blocks = []
    for c in m.support(e):
        orient = dict(m.transitive_closure(c))[e]
        cl = s.closure_indices(c).tolist()
        own = s.point_indices(e, 0).tolist()
        pos = cl.index(own[0]) if orient == 0 else cl.index(own[1])
        blocks.append((orient, cl[pos : pos + 2]))
    assert {o for o, _ in blocks} == {0, -1}
    fwd = next(b for o, b in blocks if o == 0)
    rev = next(b for o, b in blocks if o == -1)
    assert rev == fwd[::-1]


SECTIONS = {
    "p1-tri": lambda: (lambda m: (m, create_section(m, [p1(m)])))(unit_square_tri(3)),
    "p2-tri": lambda: (lambda m: (m, create_section(m, [p2(m)])))(unit_square_tri(3)),
    "p2p1-tri": lambda: (lambda m: (m, create_section(m, [p2(m, 2), p1(m)])))(unit_square_tri(2)),
    "p1-quad-vec": lambda: (lambda m: (m, create_section(m, [p1(m, 3)])))(unit_square_quad(2)),
    "p1-tet": lambda: (lambda m: (m, create_section(m, [p1(m)])))(unit_cube_tet(1)),
    "edge2-tri": lambda: (lambda m: (m, create_section(m, [((1, 2, 1), 1)])))(unit_square_tri(2)),
}


@pytest.mark.parametrize("case", sorted(SECTIONS))
@given(seed=st.integers(0, 2**32 - 1))
def test_closure_round_trip(case, seed):
    m, s = SECTIONS[case]()
    rng = np.random.default_rng(seed)
    c = int(rng.integers(m.num_cells))
    v = rng.standard_normal(s.size)
    vals = vec_get_closure(m, s, v, c)
    w = np.zeros(s.size)
    vec_set_closure_add(m, s, w, c, vals)
    assert np.array_equal(vec_get_closure(m, s, w, c), vals)
    mask = np.zeros(s.size, dtype=bool)
    mask[s.closure_indices(c)] = True
    assert np.array_equal(w[mask], v[mask]) and not w[~mask].any()


def test_closure_size_mismatch_raises():
    m = unit_square_tri(1)
    s = create_section(m, [p1(m)])
    with pytest.raises(LayoutError):
        vec_set_closure_add(m, s, np.zeros(s.size), 0, np.ones(4))
    with pytest.raises(LayoutError):
        vec_get_closure(m, s, np.zeros(s.size + 1), 0)


@pytest.mark.parametrize("fields", [[((1, 0), 1)], [((1, 0, 0, 0), 1)], [((1, 0, -1), 1)], [((1, 0, 0), 0)], []])
def test_invalid_fields(fields):
    with pytest.raises(LayoutError):
        create_section(unit_square_tri(1), fields)


@pytest.mark.parametrize("element, constrained", [("P1", 8), ("P2", 16)])
def test_boundary_constraint_counts(element, constrained):
    m = unit_square_tri(2)
    s = section_for_element(m, lagrange_element(element, "triangle"))
    s, g = mark_boundary_constrained(m, s)
    assert len(g.constrained) == constrained
    assert g.num_global == s.size - constrained
    assert np.sum(g.local_to_global == CONSTRAINED) == constrained
    np.testing.assert_array_equal(np.sort(g.local_to_global[g.unconstrained]), np.arange(g.num_global))


def test_p2_boundary_values_at_edge_midpoints():
    m = unit_square_tri(2)
    s = section_for_element(m, lagrange_element("P2", "triangle"))
    s, g = mark_boundary_constrained(m, s)
    loc = g.constrained_coords
    on_boundary = np.isclose(loc, 0).any(axis=1) | np.isclose(loc, 1).any(axis=1)
    assert on_boundary.all()
    # four midpoints per side pair: x = 0.25 or 0.75 appears on the boundary
    assert np.sum(np.isclose(loc[:, 0], 0.25)) == 2
    local = global_to_local(g, s, np.zeros(g.num_global), lambda x: x[:, 0] + 10 * x[:, 1])
    np.testing.assert_allclose(local[g.constrained], loc[:, 0] + 10 * loc[:, 1], rtol=0, atol=1e-15)


def test_global_local_round_trip():
    m = unit_square_quad(3)
    s = section_for_element(m, lagrange_element("Q1", "quadrilateral"))
    s, g = mark_boundary_constrained(m, s)
    u = np.random.default_rng(1).standard_normal(g.num_global)
    local = global_to_local(g, s, u, None)
    assert not local[g.constrained].any()
    back = local_to_global_add(g, local, np.zeros(g.num_global))
    assert np.array_equal(back, u)


def test_multifield_bc_dict():
    m = unit_square_tri(1)
    s = create_section(m, [p1(m, 2), p1(m)])
    s, g = mark_boundary_constrained(m, s, field=0)
    assert set(g.constrained_field.tolist()) == {0}
    bc = {0: lambda x: np.column_stack([x[:, 0], -x[:, 1]])}
    local = global_to_local(g, s, np.zeros(g.num_global), bc)
    comp = g.constrained_component
    expect = np.where(comp == 0, g.constrained_coords[:, 0], -g.constrained_coords[:, 1])
    np.testing.assert_array_equal(local[g.constrained], expect)
    with pytest.raises(LayoutError):
        mark_boundary_constrained(m, s, field=5)


def test_unconstrained_map_is_identity():
    m = unit_interval(4)
    s = create_section(m, [FieldLayout((1, 0))])
    g = create_global_map(s)
    np.testing.assert_array_equal(g.local_to_global, np.arange(s.size))
    with pytest.raises(LayoutError):
        global_to_local(g, s, np.zeros(3))


# hand-computed small cases

def test_single_triangle_closure_values():
    from unifem.mesh import build_from_cells

    m = build_from_cells(2, [(0, 1, 2)], [[0, 0], [1, 0], [0, 1]])
    s = create_section(m, [p1(m)])
    v = np.zeros(s.size)
    for k, val in enumerate((10.0, 20.0, 30.0)):
        v[s.point_indices(m.vertex_point(k), 0)] = val
    np.testing.assert_array_equal(vec_get_closure(m, s, v, 0), [10, 20, 30])
    assert len(create_section(m, [p2(m, 2), p1(m)]).closure_indices(0)) == 15


def test_shared_edge_value_and_accumulation():
    m = unit_square_tri(1)
    s = create_section(m, [p2(m)])
    e = next(e for e in range(*m.get_depth_stratum(1)) if m.support_size(e) == 2)
    v = np.arange(s.size, dtype=float)
    own = s.point_indices(e, 0)[0]
    for c in (0, 1):
        assert v[own] in vec_get_closure(m, s, v, c)
    w = np.zeros(s.size)
    for c in (0, 1):
        vec_set_closure_add(m, s, w, c, np.ones(6))
    assert w[own] == 2.0
    vec_set_closure_add(m, s, w, 0, np.ones(6))
    vec_set_closure_add(m, s, w, 0, np.ones(6))
    assert w[own] == 4.0


def test_interval_endpoint_values():
    m = unit_interval(3)
    s = section_for_element(m, lagrange_element("P1", "segment"))
    s, g = mark_boundary_constrained(m, s)
    assert len(g.constrained) == 2
    local = global_to_local(g, s, np.zeros(g.num_global), lambda x: x[:, 0])
    assert sorted(local[g.constrained].tolist()) == [0.0, 1.0]


def test_constrained_slots_never_reach_global():
    m = unit_square_tri(3)
    s = section_for_element(m, lagrange_element("P2", "triangle"))
    s, g = mark_boundary_constrained(m, s)
    local = np.ones(s.size)
    local[g.constrained] = np.nan
    out = local_to_global_add(g, local, np.zeros(g.num_global))
    assert np.isfinite(out).all() and (out == 1).all()
    base = np.arange(g.num_global, dtype=float)
    assert np.array_equal(local_to_global_add(g, np.zeros(s.size), base.copy()), base)
