"""FastAPI service exposing the analysis pipelines.

Run with ``uvicorn bvpcomplete.service:app``.  Every pipeline endpoint
accepts either an inline problem or a preset name and returns the same
report/tables payload the CLI writes to disk.

Error mapping: invalid input and failed problem validation come back as
422, operations whose preconditions the problem does not meet as 409, and
numerical failures (stiffness, search budget) as 500.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .errors import (
    ApplicabilityError,
    BvpError,
    SearchBudgetError,
    StiffnessError,
    StructureError,
)
from .model import problem_from_json
from .numcore import Tolerance
from .pipelines import (
    DEFAULT_N_SCHEDULE,
    ValidationFailure,
    run_asymptote,
    run_classify,
    run_complete,
    run_roots,
    run_spectrum,
    run_witness,
)
from .presets import get_preset, preset_catalog, preset_names
from .schemas import (
    AsymptoteRequest,
    ClassifyRequest,
    CompleteRequest,
    HealthResponse,
    PipelineResponse,
    PresetInfo,
    ProblemRequest,
    RootsRequest,
    SpectrumRequest,
    WitnessRequest,
)

app = FastAPI(
    title="bvpcomplete",
    description=(
        "Boundary-condition classification, eigenvalue search and "
        "root-function completeness diagnostics for first-order ODE systems"
    ),
    version=__version__,
)


def _problem_of(req: ProblemRequest):
    try:
        if req.preset is not None:
            return get_preset(req.preset)
        return problem_from_json(req.problem.model_dump())
    except (KeyError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _run(fn, *args, **kwargs) -> PipelineResponse:
    try:
        result = fn(*args, **kwargs)
    except ValidationFailure as exc:
        raise HTTPException(status_code=422, detail=f"invalid problem: {exc}") from exc
    except (ApplicabilityError, StructureError) as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except (StiffnessError, SearchBudgetError) as exc:
        raise HTTPException(status_code=500, detail=f"numerical failure: {exc}") from exc
    except BvpError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return PipelineResponse(report=result.report, tables=result.tables)


@app.get("/healthz", response_model=HealthResponse)
def healthz():
    return HealthResponse(status="ok", version=__version__)


@app.get("/presets", response_model=list[PresetInfo])
def presets():
    return [PresetInfo(**entry) for entry in preset_catalog()]


@app.get("/presets/{name}")
def preset_problem(name: str):
    from .model import problem_to_json

    if name not in preset_names():
        raise HTTPException(status_code=404, detail=f"unknown preset {name!r}")
    return problem_to_json(get_preset(name))


@app.post("/classify", response_model=PipelineResponse)
def classify_endpoint(req: ClassifyRequest):
    problem = _problem_of(req)
    return _run(run_classify, problem, Tolerance(rel=req.tol), req.rule)


@app.post("/spectrum", response_model=PipelineResponse)
def spectrum_endpoint(req: SpectrumRequest):
    problem = _problem_of(req)
    window = tuple(req.window) if req.window else None
    return _run(
        run_spectrum, problem, window, Tolerance(rel=req.tol), seed=req.seed
    )


@app.post("/roots", response_model=PipelineResponse)
def roots_endpoint(req: RootsRequest):
    problem = _problem_of(req)
    window = tuple(req.window) if req.window else None
    return _run(
        run_roots,
        problem,
        window,
        grid_points=req.grid_points,
        tol=Tolerance(rel=req.tol),
        seed=req.seed,
    )


@app.post("/complete", response_model=PipelineResponse)
def complete_endpoint(req: CompleteRequest):
    problem = _problem_of(req)
    window = tuple(req.window) if req.window else None
    schedule = tuple(req.n_schedule) if req.n_schedule else DEFAULT_N_SCHEDULE
    return _run(
        run_complete,
        problem,
        window,
        n_schedule=schedule,
        grid_points=req.grid_points,
        tol=Tolerance(rel=req.tol),
        seed=req.seed,
        probe_seed=req.probe_seed,
        with_adjoint=req.with_adjoint,
    )


@app.post("/witness", response_model=PipelineResponse)
def witness_endpoint(req: WitnessRequest):
    problem = _problem_of(req)
    return _run(
        run_witness,
        problem,
        grid_points=req.grid_points,
        tol=Tolerance(rel=req.tol),
        seed=req.seed,
    )


@app.post("/asymptote", response_model=PipelineResponse)
def asymptote_endpoint(req: AsymptoteRequest):
    problem = _problem_of(req)
    direction = complex(req.direction[0], req.direction[1])
    return _run(
        run_asymptote, problem, direction, tuple(req.ts), Tolerance(rel=req.tol)
    )
