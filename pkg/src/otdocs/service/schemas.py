"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class MethodParams(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    method: str = "emd"
    k: int = 5
    lam: float = Field(default=0.01, alias="lambda")
    max_iterations: int = 1000
    tolerance: float = 1e-6
    src_emb: str
    tgt_emb: str | None = None
    jobs: int = 1


class DistanceRequest(MethodParams):
    source_text: str
    target_text: str


class RetrieveRequest(MethodParams):
    source: str
    target: str
    out: str | None = None
    sample: int | None = None
    sample_seed: int = 0
    pair: str | None = None


class ClassifyRequest(MethodParams):
    train: str
    test: str
    out: str | None = None
    pair: str | None = None


class SweepRequest(ClassifyRequest):
    k_grid: list[int] | None = None
    lambda_grid: list[float] | None = None


class RankSummaryRequest(BaseModel):
    reports: list[str]
    out: str | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
    cached_tables: int
