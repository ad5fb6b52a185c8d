"""End-to-end pruning and solving pipelines plus run metrics.

``select_inliers`` builds the compatibility graph and extracts the maximum
clique or maximum k-core; with fewer measurements than the invariant arity it
returns every index unchanged. ``run_pipeline`` composes pruning with a
downstream solver and reports wall-clock timings.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import estimators
from .compatgraph import CompatGraph, SubsetBudget, build_graph
from .errors import TooFewMeasurementsError
from .geometry import RigidTransform, Rotation, geodesic_distance
from .graphsolvers import InlierSelection, max_clique, max_kcore
from .measurements import (
    Camera2D3D,
    MeasurementSet,
    PointNormalPairs,
    PointPairs,
    RotationSamples,
)

MODE_CLIQUE = "max_clique"
MODE_KCORE = "max_kcore"
MODE_NONE = "none"


def select_inliers(
    measurements: MeasurementSet,
    mode: str = MODE_CLIQUE,
    budget: SubsetBudget | None = None,
    time_budget_ms: float | None = None,
) -> tuple[InlierSelection, CompatGraph | None]:
    """Compatibility-graph inlier selection; returns (selection, graph).

    mode 'none' skips pruning. The graph is None when no graph was built.
    """
    n = len(measurements)
    if mode == MODE_NONE:
        return InlierSelection(np.arange(n), mode=MODE_NONE, exact=True), None
    if mode not in (MODE_CLIQUE, MODE_KCORE):
        raise ValueError(f"unknown mode {mode!r}")
    try:
        graph = build_graph(measurements, budget)
    except TooFewMeasurementsError:
        return InlierSelection(np.arange(n), mode=mode, exact=True), None
    if mode == MODE_CLIQUE:
        return max_clique(graph, time_budget_ms), graph
    return max_kcore(graph), graph


def subset_measurements(measurements: MeasurementSet, indices: np.ndarray) -> MeasurementSet:
    """Measurement set restricted to the given indices."""
    idx = np.asarray(indices, dtype=np.int64)
    if isinstance(measurements, RotationSamples):
        return RotationSamples(measurements.rotations[idx], measurements.beta)
    if isinstance(measurements, PointPairs):
        return PointPairs(measurements.a[idx], measurements.b[idx], measurements.beta)
    if isinstance(measurements, PointNormalPairs):
        return PointNormalPairs(
            measurements.a[idx], measurements.ma[idx],
            measurements.b[idx], measurements.nb[idx],
            measurements.beta, measurements.beta_normal,
        )
    if isinstance(measurements, Camera2D3D):
        return Camera2D3D(measurements.p[idx], measurements.y[idx], measurements.beta)
    raise TypeError(f"unsupported measurement type {type(measurements).__name__}")


def default_gnc_problem(measurements: MeasurementSet) -> tuple[estimators.GncProblem, estimators.GncConfig]:
    """Residual model and GNC tuning tied to the declared noise bounds.

    Rotation averaging and point registration use raw residuals with zeta set to
    beta. Point-with-normal residuals are noise-normalized (each term is at most
    1 for an inlier), so zeta is sqrt(2).
    """
    if isinstance(measurements, RotationSamples):
        return (
            estimators.RotationAveragingProblem(measurements),
            estimators.GncConfig(zeta=measurements.beta),
        )
    if isinstance(measurements, PointPairs):
        return (
            estimators.RegistrationProblem(measurements),
            estimators.GncConfig(zeta=measurements.beta),
        )
    if isinstance(measurements, PointNormalPairs):
        cfg = estimators.PnConfig.from_bounds(measurements.beta, measurements.beta_normal)
        return (
            estimators.PointNormalProblem(measurements, cfg),
            estimators.GncConfig(zeta=math.sqrt(2.0)),
        )
    raise TypeError(f"no solver for measurement type {type(measurements).__name__}")


def solve_measurements(measurements: MeasurementSet, solver: str):
    """Estimate from a (pruned) measurement set.

    solver 'closed_form' runs the unit-weight closed-form solver; 'gnc' wraps it
    in graduated non-convexity. Cross-ratio sets have no pose solver (collinear
    points leave the camera pose unobservable) and return None.
    """
    if isinstance(measurements, Camera2D3D):
        return None
    if solver == "closed_form":
        if isinstance(measurements, RotationSamples):
            return estimators.rotation_mean_chordal(measurements)
        if isinstance(measurements, PointPairs):
            return estimators.horn_registration(measurements)
        if isinstance(measurements, PointNormalPairs):
            cfg = estimators.PnConfig.from_bounds(measurements.beta, measurements.beta_normal)
            return estimators.point_normal_registration(measurements, cfg=cfg)
        raise TypeError(f"no solver for {type(measurements).__name__}")
    if solver == "gnc":
        problem, cfg = default_gnc_problem(measurements)
        return estimators.gnc_tls(problem, cfg).estimate
    raise ValueError(f"unknown solver {solver!r}")


@dataclass
class PipelineResult:
    selection: InlierSelection
    estimate: Rotation | RigidTransform | None
    graph: CompatGraph | None
    prune_time_ms: float
    solve_time_ms: float


def run_pipeline(
    measurements: MeasurementSet,
    mode: str = MODE_CLIQUE,
    solver: str = "gnc",
    budget: SubsetBudget | None = None,
    time_budget_ms: float | None = None,
    solve: bool = True,
) -> PipelineResult:
    """Prune, then solve on the selected subset."""
    t0 = time.perf_counter()
    selection, graph = select_inliers(measurements, mode, budget, time_budget_ms)
    prune_ms = (time.perf_counter() - t0) * 1000.0

    estimate = None
    solve_ms = 0.0
    if solve and not isinstance(measurements, Camera2D3D):
        kept = subset_measurements(measurements, selection.vertices)
        t1 = time.perf_counter()
        estimate = solve_measurements(kept, solver)
        solve_ms = (time.perf_counter() - t1) * 1000.0
    return PipelineResult(selection, estimate, graph, prune_ms, solve_ms)


@dataclass
class RunMetrics:
    """Per-run evaluation record; error fields are None when not applicable."""

    rotation_error_deg: float | None
    translation_error: float | None
    inliers_preserved_pct: float
    outliers_rejected_pct: float
    inlier_rate_in_selection_pct: float
    prune_time_ms: float
    solve_time_ms: float
    selection_size: int


def _rotation_of(x) -> Rotation | None:
    if isinstance(x, Rotation):
        return x
    if isinstance(x, RigidTransform):
        return x.rotation
    return None


def evaluate(
    selection: InlierSelection,
    inlier_mask: np.ndarray,
    ground_truth: Rotation | RigidTransform | None = None,
    estimate: Rotation | RigidTransform | None = None,
    prune_time_ms: float = 0.0,
    solve_time_ms: float = 0.0,
) -> RunMetrics:
    """Selection quality and estimation errors against the planted ground truth."""
    mask = np.asarray(inlier_mask, dtype=bool)
    n = mask.shape[0]
    sel = np.zeros(n, dtype=bool)
    sel[selection.vertices] = True

    n_in = int(mask.sum())
    n_out = n - n_in
    kept_in = int((sel & mask).sum())
    kept_out = int((sel & ~mask).sum())
    preserved = 100.0 * kept_in / n_in if n_in else 100.0
    rejected = 100.0 * (1.0 - kept_out / n_out) if n_out else 100.0
    sel_size = int(sel.sum())
    inlier_rate = 100.0 * kept_in / sel_size if sel_size else 0.0

    rot_err = None
    trans_err = None
    gt_rot = _rotation_of(ground_truth)
    est_rot = _rotation_of(estimate)
    if gt_rot is not None and est_rot is not None:
        rot_err = math.degrees(geodesic_distance(gt_rot, est_rot))
    if isinstance(ground_truth, RigidTransform) and isinstance(estimate, RigidTransform):
        trans_err = float(np.linalg.norm(ground_truth.translation - estimate.translation))
    return RunMetrics(
        rotation_error_deg=rot_err,
        translation_error=trans_err,
        inliers_preserved_pct=preserved,
        outliers_rejected_pct=rejected,
        inlier_rate_in_selection_pct=inlier_rate,
        prune_time_ms=prune_time_ms,
        solve_time_ms=solve_time_ms,
        selection_size=sel_size,
    )
