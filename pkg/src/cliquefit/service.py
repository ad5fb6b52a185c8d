"""FastAPI service wrapping the pruning and solving pipelines.

Endpoints:

* ``GET  /health`` - liveness and version
* ``POST /prune``  - compatibility-graph inlier selection for any problem type
* ``POST /graph``  - compatibility graph edges (for external cross-checking)
* ``POST /solve``  - prune + estimate for problems with a pose solver

Run with ``cliquefit serve`` or ``uvicorn cliquefit.service:app``.
"""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

from fastapi import FastAPI, HTTPException

from . import schemas
from .compatgraph import SubsetBudget, build_graph
from .errors import InputFormatError, TooFewMeasurementsError
from .geometry import RigidTransform, Rotation
from .graphsolvers import InlierSelection
from .pipeline import run_pipeline, select_inliers

try:
    _VERSION = version("cliquefit")
except PackageNotFoundError:  # running from a source tree
    _VERSION = "0.0.0"

app = FastAPI(
    title="cliquefit",
    version=_VERSION,
    description="Compatibility-graph outlier pruning and robust geometric estimation",
)


def _selection_model(selection: InlierSelection) -> schemas.SelectionModel:
    return schemas.SelectionModel(
        vertices=[int(v) for v in selection.vertices],
        mode=selection.mode,
        exact=selection.exact,
        clique_number=selection.clique_number,
    )


def _measurements_from(request) -> object:
    try:
        return schemas.payload_to_measurements(request.data)
    except InputFormatError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=_VERSION)


@app.post("/prune", response_model=schemas.PruneResponse)
def prune(request: schemas.PruneRequest) -> schemas.PruneResponse:
    measurements = _measurements_from(request)
    budget = SubsetBudget(request.max_subsets, request.subset_seed)
    selection, graph = select_inliers(
        measurements,
        mode=schemas.MODE_ALIASES[request.mode],
        budget=budget,
        time_budget_ms=request.time_budget_ms,
    )
    graph_info = None
    if graph is not None:
        graph_info = schemas.GraphInfoModel(
            n_vertices=graph.n_vertices,
            n_edges=graph.n_edges,
            budget_truncated=graph.budget_truncated,
            n_subsets_tested=graph.n_subsets_tested,
        )
    return schemas.PruneResponse(selection=_selection_model(selection), graph=graph_info)


@app.post("/graph", response_model=schemas.GraphResponse)
def graph_edges(request: schemas.GraphRequest) -> schemas.GraphResponse:
    measurements = _measurements_from(request)
    try:
        graph = build_graph(measurements, SubsetBudget(request.max_subsets, request.subset_seed))
    except TooFewMeasurementsError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.GraphResponse(
        n_vertices=graph.n_vertices,
        n_edges=graph.n_edges,
        budget_truncated=graph.budget_truncated,
        edges=[(int(i), int(j)) for i, j in graph.edges],
    )


@app.post("/solve", response_model=schemas.SolveResponse)
def solve(request: schemas.SolveRequest) -> schemas.SolveResponse:
    if request.data.problem == "crossratio":
        raise HTTPException(
            status_code=422,
            detail="crossratio sets have no pose solver; use /prune",
        )
    measurements = _measurements_from(request)
    budget = SubsetBudget(request.max_subsets, request.subset_seed)
    result = run_pipeline(
        measurements,
        mode=schemas.MODE_ALIASES[request.mode],
        solver=request.solver,
        budget=budget,
        time_budget_ms=request.time_budget_ms,
    )
    estimate = result.estimate
    if isinstance(estimate, RigidTransform):
        model = schemas.EstimateModel(
            rotation=[float(x) for x in estimate.rotation.m.reshape(9)],
            translation=[float(x) for x in estimate.translation],
        )
    elif isinstance(estimate, Rotation):
        model = schemas.EstimateModel(rotation=[float(x) for x in estimate.m.reshape(9)])
    else:  # pragma: no cover - guarded by the crossratio check above
        raise HTTPException(status_code=500, detail="solver produced no estimate")
    return schemas.SolveResponse(estimate=model, selection=_selection_model(result.selection))
