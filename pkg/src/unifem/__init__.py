"""Finite-element residual and Jacobian evaluation driven by pointwise physics.

Users write ``f0``/``f1`` (and their derivative blocks) at a point; the
package owns mesh topology, data layout, basis tabulation and the chunked
traversal that turns those functions into global residuals and Jacobians.
"""

from .assembly import (
    AuxField,
    ChunkWorkspace,
    DiscreteProblem,
    PerfCounters,
    SparseMatrix,
    apply_assembled,
    apply_jacobian_matrix_free,
    assemble_jacobian,
    build_problem,
    check_jacobian_fd,
    counters_snapshot,
    evaluate_residual,
    integrate_residual_chunk,
    interpolate_aux,
    report_per_dof,
    reset_counters,
)
from .discretization import (
    compute_cell_geometry,
    default_tabulation,
    lagrange_element,
    make_quadrature,
    tabulate,
)
from .layout import (
    GlobalMap,
    Section,
    create_global_map,
    create_section,
    global_to_local,
    local_to_global_add,
    mark_boundary_constrained,
    vec_get_closure,
    vec_set_closure_add,
)
from .mesh import (
    MeshPlex,
    build_from_cells,
    read_ascii,
    unit_cube_tet,
    unit_interval,
    unit_square_quad,
    unit_square_tri,
)
from .mms import l2_error, run_convergence
from .physics import (
    PointValues,
    PointwiseModel,
    model_bratu,
    model_mass_reaction,
    model_poisson,
    model_variable_poisson,
    verify_model_derivatives,
)
from .solver import NewtonReport, newton_solve, solve_linear

__version__ = "0.1.0"
