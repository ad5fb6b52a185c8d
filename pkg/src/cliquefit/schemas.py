"""Pydantic models for measurement payloads and service requests/responses.

The measurement payload doubles as the on-disk JSON format:

    {"problem": "registration", "beta": 0.05, "measurements": [{"a": [..], "b": [..]}, ...]}

Record shapes per problem: rotations are row-major 9-tuples; point pairs carry
"a"/"b"; point-with-normal adds "ma"/"nb"; 2D-3D pairs carry "p"/"y".
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from .errors import InputFormatError
from .measurements import (
    Camera2D3D,
    MeasurementSet,
    PointNormalPairs,
    PointPairs,
    RotationSamples,
)

Vec2 = Annotated[list[float], Field(min_length=2, max_length=2)]
Vec3 = Annotated[list[float], Field(min_length=3, max_length=3)]
Mat9 = Annotated[list[float], Field(min_length=9, max_length=9)]


class RotationSetPayload(BaseModel):
    problem: Literal["rotavg"]
    beta: float = Field(gt=0)
    measurements: list[Mat9] = Field(min_length=1)


class PointPairRecord(BaseModel):
    a: Vec3
    b: Vec3


class PointPairSetPayload(BaseModel):
    problem: Literal["registration"]
    beta: float = Field(gt=0)
    measurements: list[PointPairRecord] = Field(min_length=1)


class PointNormalRecord(BaseModel):
    a: Vec3
    ma: Vec3
    b: Vec3
    nb: Vec3


class PointNormalSetPayload(BaseModel):
    problem: Literal["registration_normals"]
    beta: float = Field(gt=0)
    beta_normal: float | None = Field(default=None, gt=0)
    measurements: list[PointNormalRecord] = Field(min_length=1)


class CrossRatioRecord(BaseModel):
    p: Vec3
    y: Vec2


class CrossRatioSetPayload(BaseModel):
    problem: Literal["crossratio"]
    beta: float = Field(gt=0)
    measurements: list[CrossRatioRecord] = Field(min_length=1)


MeasurementPayload = Annotated[
    Union[RotationSetPayload, PointPairSetPayload, PointNormalSetPayload, CrossRatioSetPayload],
    Field(discriminator="problem"),
]

_payload_adapter: TypeAdapter = TypeAdapter(MeasurementPayload)


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def payload_to_measurements(
    payload: RotationSetPayload | PointPairSetPayload | PointNormalSetPayload | CrossRatioSetPayload,
    beta_override: float | None = None,
    beta_normal_override: float | None = None,
) -> MeasurementSet:
    """Validated payload to numpy measurement set, with optional bound overrides."""
    beta = beta_override if beta_override is not None else payload.beta
    try:
        if isinstance(payload, RotationSetPayload):
            rot = np.asarray(payload.measurements, dtype=float).reshape(-1, 3, 3)
            return RotationSamples(rot, beta)
        if isinstance(payload, PointPairSetPayload):
            a = np.asarray([r.a for r in payload.measurements])
            b = np.asarray([r.b for r in payload.measurements])
            return PointPairs(a, b, beta)
        if isinstance(payload, PointNormalSetPayload):
            bn = beta_normal_override if beta_normal_override is not None else payload.beta_normal
            return PointNormalPairs(
                np.asarray([r.a for r in payload.measurements]),
                np.asarray([r.ma for r in payload.measurements]),
                np.asarray([r.b for r in payload.measurements]),
                np.asarray([r.nb for r in payload.measurements]),
                beta,
                bn,
            )
        if isinstance(payload, CrossRatioSetPayload):
            p = np.asarray([r.p for r in payload.measurements])
            y = np.asarray([r.y for r in payload.measurements])
            return Camera2D3D(p, y, beta)
    except ValueError as exc:
        raise InputFormatError(f"measurements: {exc}") from exc
    raise InputFormatError(f"unsupported payload type {type(payload).__name__}")


def measurements_to_payload(ms: MeasurementSet):
    """Numpy measurement set to its JSON-ready payload model."""
    if isinstance(ms, RotationSamples):
        return RotationSetPayload(
            problem="rotavg",
            beta=ms.beta,
            measurements=[list(r.reshape(9)) for r in ms.rotations],
        )
    if isinstance(ms, PointPairs):
        return PointPairSetPayload(
            problem="registration",
            beta=ms.beta,
            measurements=[
                PointPairRecord(a=list(a), b=list(b)) for a, b in zip(ms.a, ms.b)
            ],
        )
    if isinstance(ms, PointNormalPairs):
        return PointNormalSetPayload(
            problem="registration_normals",
            beta=ms.beta,
            beta_normal=ms.beta_normal,
            measurements=[
                PointNormalRecord(a=list(a), ma=list(m), b=list(b), nb=list(n))
                for a, m, b, n in zip(ms.a, ms.ma, ms.b, ms.nb)
            ],
        )
    if isinstance(ms, Camera2D3D):
        return CrossRatioSetPayload(
            problem="crossratio",
            beta=ms.beta,
            measurements=[CrossRatioRecord(p=list(p), y=list(y)) for p, y in zip(ms.p, ms.y)],
        )
    raise TypeError(f"unsupported measurement type {type(ms).__name__}")


def parse_measurement_payload(data: object):
    """Validate a decoded JSON object into a measurement payload."""
    try:
        return _payload_adapter.validate_python(data)
    except ValidationError as exc:
        raise InputFormatError(_format_validation_error(exc)) from exc


def load_measurement_file(
    path: str | Path,
    beta_override: float | None = None,
    beta_normal_override: float | None = None,
) -> MeasurementSet:
    """Read and validate a measurement JSON file."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    payload = parse_measurement_payload(data)
    return payload_to_measurements(payload, beta_override, beta_normal_override)


def save_measurement_file(path: str | Path, ms: MeasurementSet) -> None:
    payload = measurements_to_payload(ms)
    Path(path).write_text(payload.model_dump_json(exclude_none=True))


# ---------------------------------------------------------------------------
# service request / response models
# ---------------------------------------------------------------------------


ModeName = Literal["clique", "kcore", "none"]
SolverName = Literal["gnc", "closed_form"]

MODE_ALIASES = {"clique": "max_clique", "kcore": "max_kcore", "none": "none"}


class PruneRequest(BaseModel):
    data: MeasurementPayload
    mode: ModeName = "clique"
    max_subsets: int | None = Field(default=None, ge=1)
    subset_seed: int = 0
    time_budget_ms: float | None = Field(default=None, gt=0)


class SelectionModel(BaseModel):
    vertices: list[int]
    mode: str
    exact: bool
    clique_number: int | None = None


class GraphInfoModel(BaseModel):
    n_vertices: int
    n_edges: int
    budget_truncated: bool
    n_subsets_tested: int


class PruneResponse(BaseModel):
    selection: SelectionModel
    graph: GraphInfoModel | None = None


class GraphRequest(BaseModel):
    data: MeasurementPayload
    max_subsets: int | None = Field(default=None, ge=1)
    subset_seed: int = 0


class GraphResponse(BaseModel):
    n_vertices: int
    n_edges: int
    budget_truncated: bool
    edges: list[tuple[int, int]]


class SolveRequest(BaseModel):
    data: MeasurementPayload
    mode: ModeName = "clique"
    solver: SolverName = "gnc"
    max_subsets: int | None = Field(default=None, ge=1)
    subset_seed: int = 0
    time_budget_ms: float | None = Field(default=None, gt=0)


class EstimateModel(BaseModel):
    rotation: Mat9
    translation: Vec3 | None = None


class SolveResponse(BaseModel):
    estimate: EstimateModel
    selection: SelectionModel


class HealthResponse(BaseModel):
    status: str
    version: str
