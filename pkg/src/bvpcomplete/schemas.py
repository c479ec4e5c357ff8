"""Pydantic request/response models for the HTTP service.

Complex numbers travel as [re, im] pairs everywhere, matching the problem
JSON schema used by the CLI and the library.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator

ComplexPair = list[float]


class BlocksModel(BaseModel):
    sizes: list[int]
    weights: list[ComplexPair]


class BoundaryModel(BaseModel):
    C: list[list[ComplexPair]]
    D: list[list[ComplexPair]]


class ProblemModel(BaseModel):
    blocks: BlocksModel
    potential: dict[str, Any]
    bc: BoundaryModel


class ProblemRequest(BaseModel):
    """Base request: exactly one of ``problem`` or ``preset``."""

    problem: Optional[ProblemModel] = None
    preset: Optional[str] = None
    tol: float = 1e-10
    seed: int = 7

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.problem is None) == (self.preset is None):
            raise ValueError("provide exactly one of 'problem' or 'preset'")
        return self


class ClassifyRequest(ProblemRequest):
    rule: str = "weight"


class SpectrumRequest(ProblemRequest):
    window: Optional[list[float]] = Field(
        default=None, description="[re_min, re_max, im_min, im_max]"
    )


class RootsRequest(SpectrumRequest):
    grid_points: int = 2001


class CompleteRequest(SpectrumRequest):
    grid_points: int = 2001
    n_schedule: Optional[list[int]] = None
    probe_seed: int = 1234
    with_adjoint: bool = False


class WitnessRequest(ProblemRequest):
    grid_points: int = 2001


class AsymptoteRequest(ProblemRequest):
    direction: ComplexPair = Field(default=[1.0, 0.0])
    ts: list[float] = Field(default=[10.0, 20.0, 40.0])


class PipelineResponse(BaseModel):
    report: dict[str, Any]
    tables: dict[str, list[str]] = Field(default_factory=dict)


class PresetInfo(BaseModel):
    name: str
    description: str
    n: int
    weights: list[ComplexPair]
    potential: str


class HealthResponse(BaseModel):
    status: str
    version: str
