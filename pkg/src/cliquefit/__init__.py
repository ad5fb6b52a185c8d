"""Compatibility-graph outlier pruning and robust geometric estimation.

Measurement invariants turn subsets of measurements into fast boolean
compatibility tests; the tests induce a graph whose maximum clique (or maximum
k-core) isolates the mutually consistent measurements, which then feed
closed-form or graduated-non-convexity estimators.
"""

from .compatgraph import CompatGraph, SubsetBudget, build_graph, enumerate_subsets
from .errors import (
    CliquefitError,
    DegenerateGeometryError,
    DegenerateSubsetError,
    GraphTooLargeError,
    InputFormatError,
    RankDeficientError,
    TooFewMeasurementsError,
)
from .estimators import (
    GncConfig,
    GncResult,
    PnConfig,
    PointNormalProblem,
    RegistrationProblem,
    RotationAveragingProblem,
    gnc_tls,
    horn_registration,
    point_normal_registration,
    rotation_mean_chordal,
    rotavg_residual,
    tls_cost,
)
from .geometry import (
    RigidTransform,
    Rotation,
    UnitVector3,
    exp_so3,
    geodesic_distance,
    geodesic_distance_batch,
    log_so3,
    project_to_so3,
    random_rotation,
    random_unit_vector,
)
from .graphsolvers import (
    CoreDecomposition,
    InlierSelection,
    brute_force_max_clique,
    core_decomposition,
    max_clique,
    max_kcore,
)
from .invariants import (
    cross_ratio_3d,
    cross_ratio_bounds,
    test_cross_ratio,
    test_point_normal_pair,
    test_point_pair,
    test_rotation_pair,
)
from .measurements import (
    Camera2D3D,
    MeasurementSet,
    PointNormalPairs,
    PointPairs,
    RotationSamples,
)
from .pipeline import (
    PipelineResult,
    RunMetrics,
    evaluate,
    run_pipeline,
    select_inliers,
    solve_measurements,
    subset_measurements,
)
from .synth import (
    ExperimentSpec,
    gen_crossratio,
    gen_registration,
    gen_registration_all_to_all,
    gen_rotavg,
    load_points_file,
)

__all__ = [name for name in dir() if not name.startswith("_")]
