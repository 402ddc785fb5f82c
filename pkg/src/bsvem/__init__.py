"""Bulk-surface virtual element solver kit.

Lowest-order virtual elements on polygonal cut meshes for the bulk
equation, piecewise-linear surface finite elements on the induced boundary
polyline, coupled through Robin-type flux conditions.  Includes a cut-mesh
generator for implicitly defined smooth domains, elliptic and IMEX
parabolic solvers, and a convergence-study harness.
"""

from .geometry import (
    AnalyticField,
    DegenerateQueryError,
    DomainDescriptor,
    GeometryError,
    ProjectionFailureError,
    UnknownExperimentError,
    experiment_fields,
    implicit_domain,
    unit_disc,
)
from .mesh import (
    BulkSurfaceMesh,
    MeshError,
    MeshFormatError,
    MeshGenerationError,
    MeshQualityReport,
    collapse_small_angles,
    generate_cartesian_cut,
    load_mesh,
    merge_close_nodes,
    save_mesh,
    structured_disc_triangulation,
    validate_mesh,
)
from .vem import (
    DegenerateElementError,
    GlobalOperators,
    VemConfig,
    assemble,
    interpolate_bulk,
    interpolate_surface,
    local_mass,
    local_projector,
    local_stiffness,
    polygon_quadrature,
    surface_edge_matrices,
)
from .linalg import (
    LinearSolver,
    SingularSystemError,
    block_assemble,
    condition_estimate,
    read_matrix,
    read_vector,
    solve,
    write_matrix,
    write_vector,
)
from .solvers import (
    DiscreteSolution,
    EllipticProblem,
    ImexStepper,
    ParabolicProblem,
    ParabolicResult,
    SnapshotWriter,
    SolverError,
    TrajectoryRecorder,
    build_elliptic_system,
    discrete_mass,
    imex_step,
    linear_coupling_problem,
    solve_elliptic,
    solve_parabolic,
    wave_pinning_problem,
    wave_pinning_reaction,
)
from .analysis import (
    AnalysisError,
    ConvergenceTable,
    ErrorRecord,
    ErrorRecorder,
    combined_l2_error,
    combined_linf_error,
    eoc,
    l2_error_bulk,
    l2_error_surface,
    linf_error,
    nodal_l2_error_bulk,
    nodal_l2_error_surface,
    run_convergence_study,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
