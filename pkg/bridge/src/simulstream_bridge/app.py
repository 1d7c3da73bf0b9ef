"""The HTTP facade.

Stateless per request: all conditioning travels in the body, so the server
can be restarted between any two calls without changing results.  Backend
access is serialized behind one lock; the bundled models are cheap and some
memoize internally.
"""
from __future__ import annotations

import threading
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from simulstream.core import tokenize
from simulstream.models import LanguageModel, ModelError, TranslationModel

from .schemas import (
    Candidate,
    ContinuationRequest,
    ContinuationResponse,
    TranslateRequest,
    TranslateResponse,
)


def create_app(
    lm: Optional[LanguageModel] = None, mt: Optional[TranslationModel] = None
) -> FastAPI:
    app = FastAPI(title="simulstream model bridge", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    # the protocol promises 400 for malformed bodies, not framework 422
    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError) -> JSONResponse:
        detail = [
            {
                "loc": [str(part) for part in err.get("loc", ())],
                "msg": str(err.get("msg", "")),
            }
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400, content={"error": "malformed request", "detail": detail}
        )

    @app.get("/v1/health")
    async def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/v1/continuations", response_model=ContinuationResponse)
    def continuations(body: ContinuationRequest) -> ContinuationResponse:
        if lm is None:
            raise HTTPException(status_code=503, detail="language model not loaded")
        context = tokenize(body.context)
        with lock:
            try:
                sampled = lm.sample_continuations(
                    context, body.n, body.max_len, body.top_k, body.seed
                )
            except ModelError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ContinuationResponse(
            request_id=body.request_id,
            continuations=[
                " ".join(t.surface for t in cont.tokens) for cont in sampled
            ],
        )

    @app.post("/v1/translate", response_model=TranslateResponse)
    def translate(body: TranslateRequest) -> TranslateResponse:
        if mt is None:
            raise HTTPException(status_code=503, detail="translation model not loaded")
        with lock:
            try:
                ranked = mt.beam_search(
                    tokenize(body.source),
                    tokenize(body.target_prefix),
                    body.beam,
                    body.max_len,
                )
            except ModelError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        return TranslateResponse(
            request_id=body.request_id,
            candidates=[
                Candidate(
                    tokens=[t.surface for t in hyp.tokens], log_score=hyp.log_score
                )
                for hyp in ranked
            ],
        )

    return app
