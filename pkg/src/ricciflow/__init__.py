"""Numerical laboratory for curvature-flow smoothing on closed manifolds.

Three manifold families (periodic lattices, rotationally symmetric
spheres, left-invariant SU(2) metrics) share one flow loop, one curvature
toolkit, and one estimate verifier. See the README for the CLI entry
points and the test suite for the oracle conventions.
"""

from .curvature import (
    ComparisonResult,
    CurvatureBundle,
    calibrate_reaction_constants,
    compute_curvature,
    evolution_residual,
    metric_comparison,
    scalar_laplacian,
    su2_frame_curvatures,
    tensor_sup_norms,
    warped_profile_geometry,
)
from .distances import (
    Ball,
    BallCover,
    DistanceField,
    ball,
    diameter,
    geodesic_distance,
    gromov_cover,
    metric_graph,
    multi_source_distances,
)
from .energies import (
    EnergyTracker,
    build_energy_tracker,
    energy_centers,
    local_energy,
    rayleigh_quotient,
    sobolev_constant,
    track_e0,
    unit_sphere_area,
    volume_weights,
)
from .errors import (
    ConfigError,
    CurvatureBlowupError,
    DegenerateMetricError,
    HypothesisError,
    RicciflowError,
    StepUnderflowError,
    UnsupportedFamilyError,
)
from .flow import (
    FlowConfig,
    FlowState,
    FlowTrace,
    Termination,
    exact_solution_oracle,
    gauge_default,
    run_flow,
    suggest_dt,
)
from .manifolds import (
    ManifoldModel,
    MetricField,
    build_su2_metric,
    build_torus_metric,
    build_warped_sphere_metric,
)
from .moser import (
    MoserParams,
    ScheduleStage,
    SubsolutionPair,
    decay_envelopes,
    iteration_schedule,
    measured_coupling,
    moser_bound,
    regularize_low_p,
    verify_max_principle,
    verify_subsolution,
)
from .verifier import (
    CheckResult,
    EstimateReport,
    build_report,
    check_almost_flat,
    check_diameter,
    check_monitors,
    check_smoothing_estimates,
    fit_exponent,
)

__version__ = "0.1.0"
