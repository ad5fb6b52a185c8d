"""Monte Carlo benchmark driver.

Sweeps outlier rates over seeded runs, producing one CSV row per run. Rows are
sorted by (outlier_rate, seed) so any parallel execution order yields the same
file. All columns except the timing ones are deterministic functions of the
configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compatgraph import SubsetBudget
from .pipeline import RunMetrics, evaluate, run_pipeline
from .synth import ExperimentSpec, gen_crossratio, gen_registration, gen_rotavg

CSV_HEADER = (
    "problem,mode,solver,outlier_rate,seed,rot_err_deg,trans_err,"
    "inliers_preserved_pct,outliers_rejected_pct,inlier_rate_pct,"
    "prune_ms,solve_ms,success"
)

# success thresholds: rotation error <= 15 degrees, translation error <= 0.30
DEFAULT_SUCCESS_ROT_DEG = 15.0
DEFAULT_SUCCESS_TRANS = 0.30


@dataclass
class BenchRow:
    problem: str
    mode: str
    solver: str
    outlier_rate: float
    seed: int
    metrics: RunMetrics
    success: bool | None

    def to_csv(self) -> str:
        m = self.metrics

        def num(x, fmt="{:.6f}"):
            return "" if x is None else fmt.format(x)

        success = "" if self.success is None else str(int(self.success))
        return ",".join(
            [
                self.problem,
                self.mode,
                self.solver,
                f"{self.outlier_rate:g}",
                str(self.seed),
                num(m.rotation_error_deg),
                num(m.translation_error),
                num(m.inliers_preserved_pct),
                num(m.outliers_rejected_pct),
                num(m.inlier_rate_in_selection_pct),
                num(m.prune_time_ms, "{:.3f}"),
                num(m.solve_time_ms, "{:.3f}"),
                success,
            ]
        )


def generate_dataset(spec: ExperimentSpec, source_points=None, source_normals=None):
    """(ground_truth, measurements, inlier_mask) for any supported problem."""
    if spec.problem == "rotavg":
        return gen_rotavg(spec)
    if spec.problem == "registration":
        return gen_registration(spec, with_normals=False, source_points=source_points)
    if spec.problem == "registration_normals":
        return gen_registration(
            spec, with_normals=True, source_points=source_points, source_normals=source_normals
        )
    if spec.problem == "crossratio":
        measurements, mask = gen_crossratio(spec)
        return None, measurements, mask
    raise ValueError(f"unknown problem {spec.problem!r}")


def run_single(
    spec: ExperimentSpec,
    budget: SubsetBudget | None = None,
    time_budget_ms: float | None = None,
    success_rot_deg: float = DEFAULT_SUCCESS_ROT_DEG,
    success_trans: float = DEFAULT_SUCCESS_TRANS,
    source_points=None,
    source_normals=None,
) -> BenchRow:
    ground_truth, measurements, mask = generate_dataset(spec, source_points, source_normals)
    result = run_pipeline(
        measurements, mode=spec.mode, solver=spec.solver,
        budget=budget, time_budget_ms=time_budget_ms,
    )
    metrics = evaluate(
        result.selection, mask, ground_truth, result.estimate,
        prune_time_ms=result.prune_time_ms, solve_time_ms=result.solve_time_ms,
    )
    success = None
    if metrics.rotation_error_deg is not None:
        success = metrics.rotation_error_deg <= success_rot_deg
        if metrics.translation_error is not None:
            success = success and metrics.translation_error <= success_trans
    return BenchRow(
        problem=spec.problem,
        mode=spec.mode,
        solver=spec.solver,
        outlier_rate=spec.outlier_rate,
        seed=spec.rng_seed,
        metrics=metrics,
        success=success,
    )


def run_sweep(
    base_spec: ExperimentSpec,
    outlier_rates: list[float],
    n_runs: int | None = None,
    budget: SubsetBudget | None = None,
    time_budget_ms: float | None = None,
    success_rot_deg: float = DEFAULT_SUCCESS_ROT_DEG,
    success_trans: float = DEFAULT_SUCCESS_TRANS,
    source_points=None,
    source_normals=None,
) -> list[BenchRow]:
    """One row per (outlier rate, run); run i uses seed base_seed + i."""
    runs = base_spec.n_runs if n_runs is None else n_runs
    rows = []
    for rate in sorted(outlier_rates):
        for i in range(runs):
            spec = ExperimentSpec(
                problem=base_spec.problem,
                n_measurements=base_spec.n_measurements,
                outlier_rate=rate,
                noise_sigma=base_spec.noise_sigma,
                noise_bound=base_spec.noise_bound,
                noise_sigma_normal=base_spec.noise_sigma_normal,
                noise_bound_normal=base_spec.noise_bound_normal,
                rng_seed=base_spec.rng_seed + i,
                mode=base_spec.mode,
                solver=base_spec.solver,
            )
            rows.append(
                run_single(
                    spec, budget=budget, time_budget_ms=time_budget_ms,
                    success_rot_deg=success_rot_deg, success_trans=success_trans,
                    source_points=source_points, source_normals=source_normals,
                )
            )
    rows.sort(key=lambda r: (r.outlier_rate, r.seed))
    return rows


def rows_to_csv(rows: list[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def rows_to_json(rows: list[BenchRow]) -> list[dict]:
    out = []
    for r in rows:
        m = r.metrics
        out.append(
            {
                "problem": r.problem,
                "mode": r.mode,
                "solver": r.solver,
                "outlier_rate": r.outlier_rate,
                "seed": r.seed,
                "rot_err_deg": m.rotation_error_deg,
                "trans_err": m.translation_error,
                "inliers_preserved_pct": m.inliers_preserved_pct,
                "outliers_rejected_pct": m.outliers_rejected_pct,
                "inlier_rate_pct": m.inlier_rate_in_selection_pct,
                "prune_ms": m.prune_time_ms,
                "solve_ms": m.solve_time_ms,
                "success": r.success,
            }
        )
    return out


def quantile(values: list[float], q: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=float), q))
