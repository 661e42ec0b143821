"""Pydantic request/response models for the annotation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class PoolPayload(BaseModel):
    features: list[list[float]]
    true_scores: list[float] | None = None
    display: list[str] | None = None  # opaque per-item blobs (text or image URL)


class SamplerPayload(BaseModel):
    kind: str
    posterior_samples: int = 50
    candidate_cap: int | None = None
    confidence_width: float | None = None


class CreateSessionRequest(BaseModel):
    pool: PoolPayload
    sampler: SamplerPayload
    model: str = "contextual"
    seed: int = 0
    ridge: float = 1.0
    reg_zeta: float = 1.0
    refit_stride: int = 1
    budget: int | None = None
    # per-pair annotation budgets for replay-constrained sessions
    comparisons: list[tuple[int, int, int]] | None = None
    # previously collected answers to replay at creation (session import)
    history: list[tuple[int, int, int]] | None = None


class CreateSessionResponse(BaseModel):
    session_id: str


class NextPairResponse(BaseModel):
    status: str = Field(description="'ok' with a pending pair, or 'exhausted'")
    step: int | None = None
    pair: tuple[int, int] | None = None
    payloads: tuple[str, str] | None = None


class AnswerRequest(BaseModel):
    i: int
    j: int
    choice: int
    annotator: str | None = None


class RankEntry(BaseModel):
    item: int
    score: float
    std: float | None = None


class AnswerResponse(BaseModel):
    step: int
    ranking_preview: list[RankEntry] | None = None


class RankingResponse(BaseModel):
    items: list[RankEntry]


class ExportResponse(BaseModel):
    session_id: str
    model_kind: str
    sampler: SamplerPayload
    seed: int
    ridge: float
    reg_zeta: float
    refit_stride: int
    budget: int | None
    comparisons: list[tuple[int, int, int]] | None
    imported: int
    items_csv: str
    history_csv: str
    checkpoint: dict
    pending_excluded: bool


class ErrorBody(BaseModel):
    code: str
    message: str
