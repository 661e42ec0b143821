"""HTTP endpoints for live annotation sessions.

All bodies are JSON; errors carry a machine-readable code and message.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from ..data import ItemPool, write_comparisons_csv, write_items_csv
from ..errors import ConflictError, UnknownSessionError, ValidationError
from ..samplers import SamplerSpec
from .schemas import (
    AnswerRequest,
    AnswerResponse,
    CreateSessionRequest,
    CreateSessionResponse,
    ExportResponse,
    NextPairResponse,
    RankEntry,
    RankingResponse,
    SamplerPayload,
)
from .store import Session, SessionStore

PREVIEW_TOP_K = 10


def _http_error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _ranking_entries(session: Session, top_k: int | None = None) -> list[RankEntry]:
    run = session.run
    order = run.ranking()
    scores = run.scores()
    stds = run.score_stds()
    if top_k is not None:
        order = order[:top_k]
    return [
        RankEntry(
            item=int(item),
            score=float(scores[item]),
            std=None if stds is None else float(stds[item]),
        )
        for item in order
    ]


def create_app(data_dir: str | Path, checkpoint_every: int = 25) -> FastAPI:
    app = FastAPI(title="pairrank annotation service")
    store = SessionStore(data_dir, checkpoint_every)
    app.state.store = store

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(request: CreateSessionRequest) -> CreateSessionResponse:
        try:
            pool = ItemPool(
                np.asarray(request.pool.features, dtype=float), request.pool.true_scores
            )
            sampler = SamplerSpec(
                request.sampler.kind,
                request.sampler.posterior_samples,
                request.sampler.candidate_cap,
                request.sampler.confidence_width,
            )
            session = store.create(
                pool,
                sampler,
                request.model,
                request.seed,
                display=request.pool.display,
                ridge=request.ridge,
                reg_zeta=request.reg_zeta,
                refit_stride=request.refit_stride,
                budget=request.budget,
                comparisons=request.comparisons,
                history=request.history,
            )
        except ValidationError as exc:
            raise _http_error(400, "validation", str(exc)) from exc
        return CreateSessionResponse(session_id=session.session_id)

    def _get_session(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except UnknownSessionError as exc:
            raise _http_error(404, "not_found", str(exc)) from exc
        except ValidationError as exc:
            raise _http_error(500, "corrupt_log", str(exc)) from exc

    @app.get("/sessions/{session_id}/next", response_model=NextPairResponse)
    def next_pair(session_id: str) -> NextPairResponse:
        _get_session(session_id)
        session, (status, t, pair) = store.next_pair(session_id)
        if status == "exhausted":
            return NextPairResponse(status="exhausted")
        payloads = (session.display[pair[0]], session.display[pair[1]])
        return NextPairResponse(status="ok", step=t, pair=pair, payloads=payloads)

    @app.post("/sessions/{session_id}/answers", response_model=AnswerResponse)
    def submit_answer(session_id: str, request: AnswerRequest) -> AnswerResponse:
        _get_session(session_id)
        try:
            session, _ = store.submit_answer(
                session_id, request.i, request.j, request.choice, request.annotator
            )
        except ConflictError as exc:
            raise _http_error(409, "conflict", str(exc)) from exc
        except ValidationError as exc:
            raise _http_error(400, "validation", str(exc)) from exc
        return AnswerResponse(
            step=session.answered,
            ranking_preview=_ranking_entries(session, PREVIEW_TOP_K),
        )

    @app.get("/sessions/{session_id}/ranking", response_model=RankingResponse)
    def ranking(session_id: str) -> RankingResponse:
        session = _get_session(session_id)
        with session.lock:
            return RankingResponse(items=_ranking_entries(session))

    @app.get("/sessions/{session_id}/export", response_model=ExportResponse)
    def export(session_id: str) -> ExportResponse:
        session = _get_session(session_id)
        with session.lock:
            run = session.run
            history = [(r.i, r.j, r.c) for r in run.history.records]
            sampler = run.sampler
            return ExportResponse(
                session_id=session.session_id,
                model_kind=run.model_kind,
                sampler=SamplerPayload(
                    kind=sampler.kind,
                    posterior_samples=sampler.posterior_samples,
                    candidate_cap=sampler.candidate_cap,
                    confidence_width=sampler.confidence_width,
                ),
                seed=run.seed,
                ridge=run.ridge,
                reg_zeta=run.reg_zeta,
                refit_stride=run.refit_stride,
                budget=run.budget,
                comparisons=session.comparisons,
                imported=session.imported,
                items_csv=write_items_csv(run.pool),
                history_csv=write_comparisons_csv(history),
                checkpoint=run.get_state(),
                pending_excluded=session.pending is not None,
            )

    return app
