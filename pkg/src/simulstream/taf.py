"""Anticipation of future source tokens via sampled continuations.

At a decision point the engine samples ``n`` continuations of the received
source from the language model, translates the source extended by each
continuation under prefix-constrained beam search, and pools the resulting
candidates.  The fraction of the pool agreeing on the next target token is
the write probability ``pi``; the engine writes when ``pi`` reaches the
threshold ``tau`` and reads otherwise.  Once the source is exhausted the
continuations are empty, decoding runs on the complete source, and every
step writes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from .core import Action, EOS, InconsistencyError, StreamState, Token, READ, WRITE
from .models import (
    Continuation,
    LanguageModel,
    ModelError,
    ScoredHypothesis,
    TranslationModel,
)
from .policies import (
    ConfigError,
    HOLD_N,
    RALCP,
    PolicyConfig,
    VoteResult,
    rank_position_votes,
)

_EPS = 1e-9


@dataclass(frozen=True)
class TafConfig:
    n: int = 10
    l: int = 10
    k: int = 10
    tau: float = 0.6
    beam_per_continuation: int = 1
    seed: int = 0
    use_document_context: bool = False
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.l < 0:
            raise ConfigError("l must be >= 0")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")
        if self.beam_per_continuation < 1:
            raise ConfigError("beam_per_continuation must be >= 1")
        if self.temperature <= 0.0:
            raise ConfigError("temperature must be positive")


@dataclass(frozen=True)
class AnticipationStep:
    """Diagnostics of one anticipate-translate-vote round."""

    continuations: Tuple[Continuation, ...]
    candidate_pool: Tuple[ScoredHypothesis, ...]
    vote: VoteResult
    pi: float

    def __post_init__(self) -> None:
        expected = (
            self.vote.support / self.vote.total
            if self.vote.committed_prefix and self.vote.total
            else 0.0
        )
        if abs(self.pi - expected) > _EPS:
            raise InconsistencyError("pi must equal support/total (0 when empty)")


def translate_under_continuations(
    mt: TranslationModel,
    source_prefix: Sequence[Token],
    continuations: Sequence[Continuation],
    committed_hypothesis: Sequence[Token],
    beam_per_continuation: int,
    max_len: int,
) -> Tuple[ScoredHypothesis, ...]:
    """Beam-decode the committed hypothesis forward under each continuation.

    The pool concatenates each continuation's candidates in continuation
    order, beam rank within.  A model failure is re-raised with the index of
    the continuation that caused it.
    """
    pool: list[ScoredHypothesis] = []
    prefix = tuple(source_prefix)
    for index, continuation in enumerate(continuations):
        try:
            candidates = mt.beam_search(
                prefix + continuation.tokens,
                committed_hypothesis,
                beam_per_continuation,
                max_len,
            )
        except Exception as exc:
            raise ModelError(f"translation under continuation {index} failed: {exc}") from exc
        pool.extend(candidates)
    return tuple(pool)


def aggregate_majority(
    candidate_pool: Sequence[ScoredHypothesis], already_committed: int
) -> VoteResult:
    """Plurality vote on the single next position.

    Ties break toward the higher summed candidate probability, then the
    lexicographically smaller token.  Candidates shorter than the position
    abstain; when every candidate abstains the vote is empty with support 0.
    """
    if not candidate_pool:
        raise InconsistencyError("empty candidate pool")
    ranked = rank_position_votes(candidate_pool, already_committed)
    total = len(candidate_pool)
    if not ranked:
        return VoteResult((), 0, total)
    winner, backers = ranked[0]
    return VoteResult((winner,), len(backers), total)


def policy_score(vote: VoteResult) -> float:
    """The write probability pi: agreeing fraction, zero for an empty vote."""
    if not vote.committed_prefix or vote.total == 0:
        return 0.0
    return vote.support / vote.total


def anticipate(
    state: StreamState,
    cfg: TafConfig,
    lm: LanguageModel,
    mt: TranslationModel,
    step_seed: int,
    max_len: int,
    lm_context: Optional[Sequence[Token]] = None,
) -> AnticipationStep:
    """Run one sample-translate-vote round at the current state."""
    if state.source_exhausted:
        continuations = tuple(Continuation(()) for _ in range(cfg.n))
    else:
        context = tuple(lm_context) if lm_context is not None else state.source_read
        continuations = lm.sample_continuations(
            context, cfg.n, cfg.l, cfg.k, step_seed
        )
    pool = translate_under_continuations(
        mt,
        state.source_read,
        continuations,
        state.hypothesis,
        cfg.beam_per_continuation,
        max_len,
    )
    vote = aggregate_majority(pool, len(state.hypothesis))
    return AnticipationStep(continuations, pool, vote, policy_score(vote))


def taf_step(
    state: StreamState,
    cfg: TafConfig,
    lm: LanguageModel,
    mt: TranslationModel,
    step_seed: int,
    max_len: int,
    lm_context: Optional[Sequence[Token]] = None,
) -> Tuple[Action, AnticipationStep]:
    """One decision of the anticipation policy.

    Writes the voted token when ``pi >= tau``; reads otherwise.  An
    end-of-sentence winner is only writable once the source is exhausted —
    before that it forces a READ, since a committed EOS could never be
    retracted.  After exhaustion every step writes regardless of ``pi``.
    """
    round_ = anticipate(state, cfg, lm, mt, step_seed, max_len, lm_context)
    winner = round_.vote.committed_prefix
    if state.source_exhausted:
        if not winner:
            return Action(WRITE, (EOS,), 1.0), round_
        return Action(WRITE, winner, confidence=_clamp(round_.pi)), round_
    if winner and round_.pi + _EPS >= cfg.tau and not winner[0].is_eos:
        return Action(WRITE, winner, confidence=_clamp(round_.pi)), round_
    return Action(READ, confidence=_clamp(round_.pi)), round_


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def compose_with_base(base_cfg: PolicyConfig, taf_cfg: Optional[TafConfig]):
    """Build a stepping engine for a base policy, optionally anticipation-driven.

    Wait-K-Stride-N and Local Agreement keep their read/write schedules but
    generate each token by the continuation vote; RALCP pools the candidates
    of all continuations and applies its relaxed-agreement vote with
    ``gamma = tau``.  Hold-N has no generation step to anticipate, so
    composing it is a configuration error.  For the RALCP composition the
    pool size ``n * beam_per_continuation`` must equal the configured RALCP
    beam width, keeping the candidate budget comparable.
    """
    from . import engines

    if taf_cfg is not None and base_cfg.kind == HOLD_N:
        raise ConfigError("hold-n cannot be composed with anticipation")
    if taf_cfg is not None and base_cfg.kind == RALCP:
        expected = taf_cfg.n * taf_cfg.beam_per_continuation
        if base_cfg.beam_width != expected:
            raise ConfigError(
                f"ralcp beam width {base_cfg.beam_width} != "
                f"n * beam_per_continuation = {expected}"
            )
    return engines.build_engine(base_cfg, taf_cfg)
