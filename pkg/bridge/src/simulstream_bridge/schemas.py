"""Wire schemas.

Bodies are plain text on the way in (space-joined token surfaces; the
reserved end-of-sentence surface is legal and survives the round trip) and
JSON structures on the way out.  Every response echoes the ``request_id``
it answers.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class ContinuationRequest(BaseModel):
    request_id: str
    context: str
    n: int = Field(ge=1)
    max_len: int = Field(ge=0)
    top_k: int = Field(ge=1)
    seed: int


class ContinuationResponse(BaseModel):
    request_id: str
    continuations: list[str]


class TranslateRequest(BaseModel):
    request_id: str
    source: str
    target_prefix: str
    beam: int = Field(ge=1)
    max_len: int = Field(ge=0)
    mode: Literal["candidates"]


class Candidate(BaseModel):
    tokens: list[str]
    log_score: float


class TranslateResponse(BaseModel):
    request_id: str
    candidates: list[Candidate]
