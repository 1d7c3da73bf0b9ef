"""HTTP-backed models speaking the serving wire protocol.

Both clients are drop-in replacements for the in-process models: the
language model client implements ``sample_continuations`` and the
translation client implements ``beam_search``.  Request payloads are plain
text (space-joined surfaces; the reserved end-of-sentence surface survives
the round trip); translate responses carry candidates as token arrays.  A
remote backend that wraps the in-process models reproduces their outputs
bit for bit.
"""
from __future__ import annotations

import itertools
from typing import Optional, Sequence, Tuple

import httpx

from .core import EOS, Token, tokenize
from .models import (
    Continuation,
    ModelError,
    NextTokenDistribution,
    ScoredHypothesis,
)

_HEALTH = "/v1/health"
_CONTINUATIONS = "/v1/continuations"
_TRANSLATE = "/v1/translate"


def _surface_text(tokens: Sequence[Token]) -> str:
    # Keeps the EOS surface, unlike detokenize: the sentinel tells the
    # backend the source is complete.
    return " ".join(t.surface for t in tokens)


class _HttpModel:
    def __init__(
        self,
        base_url: str,
        client: Optional[httpx.Client] = None,
        timeout: float = 30.0,
    ) -> None:
        self._base = base_url.rstrip("/")
        self._own_client = client is None
        self._client = client or httpx.Client(timeout=timeout)
        self._ids = itertools.count(1)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(self._base + path, json=payload)
        except httpx.HTTPError as exc:
            raise ModelError(f"request to {path} failed: {exc}") from exc
        if response.status_code != 200:
            raise ModelError(
                f"{path} returned {response.status_code}: {response.text[:200]}"
            )
        body = response.json()
        if body.get("request_id") != payload["request_id"]:
            raise ModelError(f"{path} answered a different request")
        return body

    def healthy(self) -> bool:
        try:
            response = self._client.get(self._base + _HEALTH)
        except httpx.HTTPError:
            return False
        return response.status_code == 200 and response.json().get("status") == "ok"

    def close(self) -> None:
        if self._own_client:
            self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class RemoteLm(_HttpModel):
    """Continuation sampling over HTTP."""

    def next_distribution(self, context: Sequence[Token]) -> NextTokenDistribution:
        raise ModelError("the wire protocol does not expose full distributions")

    def sample_continuations(
        self,
        context: Sequence[Token],
        n: int,
        l: int,
        k: int,
        seed: int,
        temperature: float = 1.0,
    ) -> Tuple[Continuation, ...]:
        if temperature != 1.0:
            raise ModelError("remote sampling does not support temperature")
        request_id = f"lm-{next(self._ids)}"
        body = self._post(
            _CONTINUATIONS,
            {
                "request_id": request_id,
                "context": _surface_text(context),
                "n": n,
                "max_len": l,
                "top_k": k,
                "seed": seed,
            },
        )
        raw = body.get("continuations")
        if not isinstance(raw, list) or len(raw) != n:
            raise ModelError(f"expected {n} continuations, got {raw!r}")
        out = []
        for text in raw:
            tokens = tokenize(str(text))
            truncated = bool(tokens) and tokens[-1].is_eos
            out.append(Continuation(tokens, truncated))
        return tuple(out)


class RemoteMt(_HttpModel):
    """Prefix-constrained beam search over HTTP."""

    def beam_search(
        self,
        source: Sequence[Token],
        target_prefix: Sequence[Token],
        beam_width: int,
        max_len: int,
    ) -> Tuple[ScoredHypothesis, ...]:
        request_id = f"mt-{next(self._ids)}"
        body = self._post(
            _TRANSLATE,
            {
                "request_id": request_id,
                "source": _surface_text(source),
                "target_prefix": _surface_text(target_prefix),
                "beam": beam_width,
                "max_len": max_len,
                "mode": "candidates",
            },
        )
        raw = body.get("candidates")
        if not isinstance(raw, list) or not raw:
            raise ModelError(f"translate returned no candidates: {raw!r}")
        out = []
        for item in raw:
            try:
                surfaces = item["tokens"]
                if isinstance(surfaces, str):
                    raise TypeError("tokens must be an array")
                tokens = tuple(
                    EOS if str(s) == EOS.surface else Token(str(s))
                    for s in surfaces
                )
                score = float(item["log_score"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelError(f"malformed candidate {item!r}") from exc
            out.append(ScoredHypothesis(tokens, score))
        return tuple(out)
