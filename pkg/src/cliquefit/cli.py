"""Command-line client for the pruning and solving pipelines.

Thin layer over the same core functions the HTTP service exposes: commands
parse arguments and files, delegate, and serialize results. Output files are
deterministic for a fixed command line (the bench CSV's timing columns are the
one exception; they report wall clock).

Exit codes: 0 on success, 2 on malformed input.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from . import schemas
from .compatgraph import SubsetBudget, build_graph
from .errors import InputFormatError, TooFewMeasurementsError
from .geometry import RigidTransform, Rotation
from .pipeline import run_pipeline, select_inliers
from .synth import ExperimentSpec, load_points_file

_MODE_CHOICES = click.Choice(["clique", "kcore", "none"])
_SOLVER_CHOICES = click.Choice(["gnc", "closed-form"])


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load(path: str, beta: float | None, beta_normal: float | None):
    try:
        return schemas.load_measurement_file(path, beta, beta_normal)
    except InputFormatError as exc:
        _fail(str(exc))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _selection_dict(selection) -> dict:
    d = {
        "selected": [int(v) for v in selection.vertices],
        "mode": selection.mode,
        "exact": selection.exact,
        "selection_size": len(selection),
    }
    if selection.clique_number is not None:
        d["clique_number"] = selection.clique_number
    return d


def _estimate_dict(estimate) -> dict:
    if isinstance(estimate, RigidTransform):
        return {
            "rotation": [float(x) for x in estimate.rotation.m.reshape(9)],
            "translation": [float(x) for x in estimate.translation],
        }
    if isinstance(estimate, Rotation):
        return {"rotation": [float(x) for x in estimate.m.reshape(9)]}
    return {}


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _solver_name(cli_name: str) -> str:
    return cli_name.replace("-", "_")


@click.group()
def main():
    """Compatibility-graph outlier pruning and robust geometric estimation."""


_common_prune_options = [
    click.option("--mode", type=_MODE_CHOICES, default="clique", show_default=True,
                 help="Inlier selection: maximum clique, maximum k-core, or none."),
    click.option("--beta", type=float, default=None, help="Override the file's noise bound."),
    click.option("--beta-normal", type=float, default=None,
                 help="Override the file's normal noise bound."),
    click.option("--budget", type=int, default=None,
                 help="Maximum number of subsets tested while building the graph."),
    click.option("--seed", type=int, default=0, show_default=True,
                 help="Seed for budgeted subset sampling."),
    click.option("--time-budget-ms", type=float, default=None,
                 help="Clique search time budget (exact flag drops when exceeded)."),
    click.option("--out", type=click.Path(dir_okay=False), default=None,
                 help="Output path (stdout when omitted)."),
]


def _add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@_add_options(_common_prune_options)
def prune(input_file, mode, beta, beta_normal, budget, seed, time_budget_ms, out):
    """Select inliers from a measurement file; emits a selection JSON."""
    measurements = _load(input_file, beta, beta_normal)
    selection, graph = select_inliers(
        measurements,
        mode=schemas.MODE_ALIASES[mode],
        budget=SubsetBudget(budget, seed),
        time_budget_ms=time_budget_ms,
    )
    payload = {"problem": measurements.problem, "n_measurements": len(measurements)}
    payload.update(_selection_dict(selection))
    if graph is not None:
        payload["graph"] = {
            "n_edges": graph.n_edges,
            "budget_truncated": graph.budget_truncated,
            "n_subsets_tested": graph.n_subsets_tested,
        }
    _emit(_dump(payload), out)


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--beta", type=float, default=None, help="Override the file's noise bound.")
@click.option("--beta-normal", type=float, default=None)
@click.option("--budget", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def graph(input_file, beta, beta_normal, budget, seed, out):
    """Export the compatibility graph as an edge list ('i j' per line, 0-indexed)."""
    measurements = _load(input_file, beta, beta_normal)
    try:
        g = build_graph(measurements, SubsetBudget(budget, seed))
    except TooFewMeasurementsError as exc:
        _fail(str(exc))
    _emit(g.to_edge_list_text(), out)


def _pipeline_command(input_file, expected_problems, mode, solver, beta, beta_normal,
                      budget, seed, time_budget_ms, out):
    measurements = _load(input_file, beta, beta_normal)
    if measurements.problem not in expected_problems:
        _fail(
            f"{input_file}: problem: expected one of {sorted(expected_problems)}, "
            f"got {measurements.problem!r}"
        )
    result = run_pipeline(
        measurements,
        mode=schemas.MODE_ALIASES[mode],
        solver=_solver_name(solver),
        budget=SubsetBudget(budget, seed),
        time_budget_ms=time_budget_ms,
    )
    payload = {
        "problem": measurements.problem,
        "n_measurements": len(measurements),
        "selection": _selection_dict(result.selection),
    }
    if result.estimate is not None:
        payload["estimate"] = _estimate_dict(result.estimate)
    _emit(_dump(payload), out)


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--solver", type=_SOLVER_CHOICES, default="gnc", show_default=True)
@_add_options(_common_prune_options)
def rotavg(input_file, solver, mode, beta, beta_normal, budget, seed, time_budget_ms, out):
    """Robust single rotation averaging: prune, then solve."""
    _pipeline_command(input_file, {"rotavg"}, mode, solver, beta, beta_normal,
                      budget, seed, time_budget_ms, out)


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--solver", type=_SOLVER_CHOICES, default="closed-form", show_default=True)
@_add_options(_common_prune_options)
def register(input_file, solver, mode, beta, beta_normal, budget, seed, time_budget_ms, out):
    """Robust registration (points or points with normals): prune, then solve."""
    _pipeline_command(input_file, {"registration", "registration_normals"}, mode, solver,
                      beta, beta_normal, budget, seed, time_budget_ms, out)


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@_add_options(_common_prune_options)
def crossratio(input_file, mode, beta, beta_normal, budget, seed, time_budget_ms, out):
    """Prune 2D-3D correspondences of collinear points (no pose solver)."""
    measurements = _load(input_file, beta, beta_normal)
    if measurements.problem != "crossratio":
        _fail(f"{input_file}: problem: expected 'crossratio', got {measurements.problem!r}")
    selection, graph_built = select_inliers(
        measurements,
        mode=schemas.MODE_ALIASES[mode],
        budget=SubsetBudget(budget, seed),
        time_budget_ms=time_budget_ms,
    )
    payload = {
        "problem": measurements.problem,
        "n_measurements": len(measurements),
        "selection": _selection_dict(selection),
    }
    if graph_built is not None:
        payload["graph"] = {
            "n_edges": graph_built.n_edges,
            "budget_truncated": graph_built.budget_truncated,
        }
    _emit(_dump(payload), out)


@main.command()
@click.option("--problem",
              type=click.Choice(["rotavg", "registration", "registration_normals", "crossratio"]),
              required=True)
@click.option("--n", "n_measurements", type=int, default=100, show_default=True)
@click.option("--sigma", type=float, default=0.01, show_default=True,
              help="Noise std dev in problem units (radians for rotavg).")
@click.option("--beta", type=float, default=None, help="Noise bound (defaults from sigma).")
@click.option("--beta-normal", type=float, default=None)
@click.option("--outlier-rates", default="0.0,0.5,0.9", show_default=True,
              help="Comma-separated outlier fractions in [0, 1).")
@click.option("--runs", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mode", type=_MODE_CHOICES, default="clique", show_default=True)
@click.option("--solver", type=_SOLVER_CHOICES, default="gnc", show_default=True)
@click.option("--budget", type=int, default=None)
@click.option("--time-budget-ms", type=float, default=None)
@click.option("--points-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Source cloud 'x y z [nx ny nz]' for registration problems.")
@click.option("--success-rot-deg", type=float, default=bench_mod.DEFAULT_SUCCESS_ROT_DEG,
              show_default=True)
@click.option("--success-trans", type=float, default=bench_mod.DEFAULT_SUCCESS_TRANS,
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
def bench(problem, n_measurements, sigma, beta, beta_normal, outlier_rates, runs, seed,
          mode, solver, budget, time_budget_ms, points_file, success_rot_deg,
          success_trans, out, fmt):
    """Monte Carlo sweep over outlier rates; one row per run."""
    try:
        rates = [float(x) for x in outlier_rates.split(",") if x.strip()]
        if not rates:
            raise ValueError("no rates given")
        for r in rates:
            if not 0.0 <= r < 1.0:
                raise ValueError(f"rate {r} outside [0, 1)")
    except ValueError as exc:
        _fail(f"--outlier-rates: {exc}")
    source_points = source_normals = None
    if points_file:
        try:
            source_points, source_normals = load_points_file(points_file)
        except ValueError as exc:
            _fail(str(exc))
        n_measurements = len(source_points)
    try:
        base = ExperimentSpec(
            problem=problem,
            n_measurements=n_measurements,
            outlier_rate=rates[0],
            noise_sigma=sigma,
            noise_bound=beta,
            noise_bound_normal=beta_normal,
            n_runs=runs,
            rng_seed=seed,
            mode=schemas.MODE_ALIASES[mode],
            solver=_solver_name(solver),
        )
        base.beta  # force the default-bound computation to validate sigma
    except ValueError as exc:
        _fail(str(exc))
    rows = bench_mod.run_sweep(
        base, rates,
        budget=SubsetBudget(budget, seed) if budget else None,
        time_budget_ms=time_budget_ms,
        success_rot_deg=success_rot_deg,
        success_trans=success_trans,
        source_points=source_points,
        source_normals=source_normals,
    )
    if fmt == "csv":
        _emit(bench_mod.rows_to_csv(rows), out)
    else:
        _emit(json.dumps(bench_mod.rows_to_json(rows), indent=2) + "\n", out)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("cliquefit.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
