"""Stepping engines: one class per policy, each turning states into actions.

An engine is constructed from a policy configuration (optionally composed
with anticipation), reset per sentence, and stepped by the harness.  Every
step receives a ``StepContext`` carrying the models, the per-step RNG seed,
the remaining hypothesis budget, and the language-model context.

Shared conventions:

* the first action of a sentence is always READ (nothing can be translated
  from an empty source);
* an end-of-sentence token may only be committed once the source is
  exhausted — a pre-exhaustion EOS vote winner stops the commit (vote
  policies read instead; schedule-forced writes fall back to the best
  non-EOS token so the schedule is preserved);
* after exhaustion engines write every step, completing the hypothesis
  through their own generation path;
* any write is trimmed to the remaining hypothesis budget.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .core import Action, EOS, StepRecord, StreamState, Token, READ, WRITE
from .models import Continuation, LanguageModel, ScoredHypothesis, TranslationModel
from .policies import (
    ConfigError,
    HOLD_N,
    LOCAL_AGREEMENT,
    RALCP,
    WAIT_K_STRIDE_N,
    PolicyConfig,
    hold_n_commit,
    local_agreement_commit,
    ralcp_vote,
    rank_position_votes,
    wait_k_stride_n_decide,
)
from .taf import (
    TafConfig,
    aggregate_majority,
    anticipate,
    policy_score,
    translate_under_continuations,
)


@dataclass(frozen=True)
class ModelsBundle:
    mt: TranslationModel
    lm: Optional[LanguageModel] = None


@dataclass(frozen=True)
class StepContext:
    models: ModelsBundle
    step_index: int
    step_seed: int
    hyp_budget: int
    lm_context: Optional[Tuple[Token, ...]] = None

    @property
    def gen_max_len(self) -> int:
        # Room for the budgeted tokens plus a terminating EOS.
        return self.hyp_budget + 1


def _trim_to_budget(
    tokens: Sequence[Token], budget: int
) -> Tuple[Tuple[Token, ...], bool]:
    out: list[Token] = []
    used = 0
    for tok in tokens:
        if tok.is_eos:
            out.append(tok)
            return tuple(out), False
        if used >= budget:
            return tuple(out), True
        out.append(tok)
        used += 1
    return tuple(out), False


def _drop_pre_exhaustion_eos(tokens: Sequence[Token]) -> Tuple[Token, ...]:
    out: list[Token] = []
    for tok in tokens:
        if tok.is_eos:
            break
        out.append(tok)
    return tuple(out)


def _record(ctx: StepContext, action: Action, pi: float, pool: int, note: str) -> StepRecord:
    committed = sum(1 for t in action.tokens if not t.is_eos)
    return StepRecord(ctx.step_index, action.kind, pi, pool, committed, note)


class Engine:
    """Base class; subclasses implement ``step``."""

    uses_lm = False

    def start_sentence(self) -> None:  # pragma: no cover - default is stateless
        pass

    def step(self, state: StreamState, ctx: StepContext) -> Tuple[Action, StepRecord]:
        raise NotImplementedError


class WaitKStrideNEngine(Engine):
    """Fixed schedule; token generation is greedy or vote-driven."""

    def __init__(self, cfg: PolicyConfig, taf: Optional[TafConfig] = None) -> None:
        self.cfg = cfg
        self.taf = taf
        self.uses_lm = taf is not None

    def _schedule_token(
        self, state: StreamState, ctx: StepContext
    ) -> Tuple[Token, float, int, str]:
        """Pick the next token; returns (token, pi, pool size, note)."""
        allow_eos = state.source_exhausted
        if self.taf is not None:
            round_ = anticipate(
                state,
                self.taf,
                ctx.models.lm,
                ctx.models.mt,
                ctx.step_seed,
                1,
                ctx.lm_context,
            )
            ranked = rank_position_votes(round_.candidate_pool, len(state.hypothesis))
            for token, _ in ranked:
                if allow_eos or not token.is_eos:
                    return token, round_.pi, len(round_.candidate_pool), ""
            # Every candidate voted to stop early; keep the schedule alive
            # with the translator's best non-EOS guess.
            note = "eos-blocked"
        else:
            note = ""
        candidates = ctx.models.mt.beam_search(
            state.source_read, state.hypothesis, 2, 1
        )
        for hyp in candidates:
            token = hyp.tokens[-1]
            if allow_eos or not token.is_eos:
                return token, 1.0, len(candidates), note
        return candidates[0].tokens[-1], 1.0, len(candidates), note

    def step(self, state: StreamState, ctx: StepContext) -> Tuple[Action, StepRecord]:
        kind = wait_k_stride_n_decide(state, self.cfg.K, self.cfg.N)
        if kind == READ:
            action = Action(READ, confidence=1.0)
            return action, _record(ctx, action, 0.0, 0, "schedule")
        token, pi, pool, note = self._schedule_token(state, ctx)
        action = Action(WRITE, (token,), confidence=min(1.0, max(0.0, pi)))
        return action, _record(ctx, action, pi, pool, note)


class _RegeneratingEngine(Engine):
    """Shared logic for policies that regenerate a hypothesis after reads."""

    def __init__(self, cfg: PolicyConfig, taf: Optional[TafConfig] = None) -> None:
        self.cfg = cfg
        self.taf = taf
        self.uses_lm = taf is not None
        self._generated_at = 0

    def start_sentence(self) -> None:
        self._generated_at = 0

    def _full_hypothesis(
        self, state: StreamState, ctx: StepContext, allow_eos: bool
    ) -> Tuple[Token, ...]:
        """Regenerate the complete hypothesis extending the committed prefix."""
        if self.taf is None:
            best = ctx.models.mt.beam_search(
                state.source_read,
                state.hypothesis,
                self.cfg.beam_width,
                ctx.gen_max_len,
            )[0].tokens
            return best if allow_eos else _drop_pre_exhaustion_eos(best)
        # Vote-driven decoding: each next token is the majority winner over
        # the candidate pool, continuations held fixed within the step.
        if state.source_exhausted:
            continuations = tuple(
                Continuation((), False) for _ in range(self.taf.n)
            )
        else:
            context = (
                ctx.lm_context if ctx.lm_context is not None else state.source_read
            )
            continuations = ctx.models.lm.sample_continuations(
                context, self.taf.n, self.taf.l, self.taf.k, ctx.step_seed
            )
        partial: list[Token] = list(state.hypothesis)
        while len(partial) - len(state.hypothesis) < ctx.gen_max_len:
            pool = translate_under_continuations(
                ctx.models.mt,
                state.source_read,
                continuations,
                partial,
                self.taf.beam_per_continuation,
                1,
            )
            vote = aggregate_majority(pool, len(partial))
            if not vote.committed_prefix:
                break
            token = vote.committed_prefix[0]
            if token.is_eos:
                if allow_eos:
                    partial.append(token)
                break
            partial.append(token)
        return tuple(partial)

    def _forced_completion(
        self, state: StreamState, ctx: StepContext
    ) -> Tuple[Action, StepRecord]:
        full = self._full_hypothesis(state, ctx, allow_eos=True)
        remainder = full[len(state.hypothesis) :]
        if not remainder:
            remainder = (EOS,)
        tokens, truncated = _trim_to_budget(remainder, ctx.hyp_budget)
        if not tokens:
            tokens = (EOS,)
        action = Action(WRITE, tokens, confidence=1.0)
        note = "forced+truncated" if truncated else "forced"
        return action, _record(ctx, action, 1.0, 0, note)


class LocalAgreementEngine(_RegeneratingEngine):
    """Commit the agreed prefix of the last N regenerated hypotheses."""

    def __init__(self, cfg: PolicyConfig, taf: Optional[TafConfig] = None) -> None:
        super().__init__(cfg, taf)
        self._recent: deque = deque(maxlen=cfg.N)

    def start_sentence(self) -> None:
        super().start_sentence()
        self._recent = deque(maxlen=self.cfg.N)

    def step(self, state: StreamState, ctx: StepContext) -> Tuple[Action, StepRecord]:
        if state.source_exhausted:
            return self._forced_completion(state, ctx)
        if state.tokens_read - self._generated_at < self.cfg.segment_size:
            action = Action(READ, confidence=1.0)
            return action, _record(ctx, action, 0.0, 0, "schedule")
        hypothesis = self._full_hypothesis(state, ctx, allow_eos=False)
        self._recent.append(hypothesis)
        self._generated_at = state.tokens_read
        if len(self._recent) == self.cfg.N:
            vote = local_agreement_commit(tuple(self._recent), len(state.hypothesis))
            pi = policy_score(vote)
            tokens, truncated = _trim_to_budget(vote.committed_prefix, ctx.hyp_budget)
            if tokens:
                action = Action(WRITE, tokens, confidence=pi)
                note = "truncated" if truncated else ""
                return action, _record(ctx, action, pi, len(self._recent), note)
            action = Action(READ, confidence=pi)
            return action, _record(ctx, action, pi, len(self._recent), "no-agreement")
        action = Action(READ, confidence=1.0)
        return action, _record(ctx, action, 0.0, 0, "warmup")


class HoldNEngine(_RegeneratingEngine):
    """Commit all but the last N tokens of each regenerated hypothesis."""

    def step(self, state: StreamState, ctx: StepContext) -> Tuple[Action, StepRecord]:
        if state.source_exhausted:
            return self._forced_completion(state, ctx)
        if state.tokens_read == self._generated_at:
            action = Action(READ, confidence=1.0)
            return action, _record(ctx, action, 0.0, 0, "schedule")
        hypothesis = self._full_hypothesis(state, ctx, allow_eos=False)
        self._generated_at = state.tokens_read
        vote = hold_n_commit(hypothesis, self.cfg.N, len(state.hypothesis))
        pi = policy_score(vote)
        tokens, truncated = _trim_to_budget(vote.committed_prefix, ctx.hyp_budget)
        if tokens:
            action = Action(WRITE, tokens, confidence=pi)
            return action, _record(ctx, action, pi, 1, "truncated" if truncated else "")
        action = Action(READ, confidence=pi)
        return action, _record(ctx, action, pi, 1, "held-back")


class RalcpEngine(Engine):
    """Relaxed-agreement commits over a candidate pool.

    Plain mode pools the beam candidates of the received source; anticipation
    mode pools ``beam_per_continuation`` candidates under each sampled
    continuation and votes with ``gamma = tau``.
    """

    def __init__(self, cfg: PolicyConfig, taf: Optional[TafConfig] = None) -> None:
        self.cfg = cfg
        self.taf = taf
        self.uses_lm = taf is not None
        self.gamma = taf.tau if taf is not None else cfg.gamma

    def _pool(
        self, state: StreamState, ctx: StepContext
    ) -> Tuple[ScoredHypothesis, ...]:
        if self.taf is None:
            return ctx.models.mt.beam_search(
                state.source_read,
                state.hypothesis,
                self.cfg.beam_width,
                ctx.gen_max_len,
            )
        if state.source_exhausted:
            continuations = tuple(
                Continuation((), False) for _ in range(self.taf.n)
            )
        else:
            context = (
                ctx.lm_context if ctx.lm_context is not None else state.source_read
            )
            continuations = ctx.models.lm.sample_continuations(
                context, self.taf.n, self.taf.l, self.taf.k, ctx.step_seed
            )
        return translate_under_continuations(
            ctx.models.mt,
            state.source_read,
            continuations,
            state.hypothesis,
            self.taf.beam_per_continuation,
            ctx.gen_max_len,
        )

    def step(self, state: StreamState, ctx: StepContext) -> Tuple[Action, StepRecord]:
        if state.source_exhausted:
            pool = self._pool(state, ctx)
            best = min(
                pool, key=lambda h: (-h.log_score, tuple(t.surface for t in h.tokens))
            )
            remainder = best.tokens[len(state.hypothesis) :]
            if not remainder:
                remainder = (EOS,)
            tokens, truncated = _trim_to_budget(remainder, ctx.hyp_budget)
            if not tokens:
                tokens = (EOS,)
            action = Action(WRITE, tokens, confidence=1.0)
            note = "forced+truncated" if truncated else "forced"
            return action, _record(ctx, action, 1.0, len(pool), note)
        if state.tokens_read == 0:
            action = Action(READ, confidence=1.0)
            return action, _record(ctx, action, 0.0, 0, "schedule")
        pool = self._pool(state, ctx)
        vote = ralcp_vote(pool, self.gamma, len(state.hypothesis))
        pi = policy_score(vote)
        prefix = _drop_pre_exhaustion_eos(vote.committed_prefix)
        tokens, truncated = _trim_to_budget(prefix, ctx.hyp_budget)
        if tokens:
            action = Action(WRITE, tokens, confidence=min(1.0, max(0.0, pi)))
            note = "truncated" if truncated else ""
            return action, _record(ctx, action, pi, len(pool), note)
        action = Action(READ, confidence=min(1.0, max(0.0, pi)))
        return action, _record(ctx, action, pi, len(pool), "")


def build_engine(base_cfg: PolicyConfig, taf_cfg: Optional[TafConfig]) -> Engine:
    if base_cfg.kind == WAIT_K_STRIDE_N:
        return WaitKStrideNEngine(base_cfg, taf_cfg)
    if base_cfg.kind == LOCAL_AGREEMENT:
        return LocalAgreementEngine(base_cfg, taf_cfg)
    if base_cfg.kind == HOLD_N:
        if taf_cfg is not None:
            raise ConfigError("hold-n cannot be composed with anticipation")
        return HoldNEngine(base_cfg)
    if base_cfg.kind == RALCP:
        return RalcpEngine(base_cfg, taf_cfg)
    raise ConfigError(f"unknown policy kind {base_cfg.kind!r}")
