"""Baseline simultaneous decoding policies.

Four commit rules over incremental hypotheses:

* Wait-K-Stride-N: read K tokens, then alternate N writes with one read.
* Local Agreement-N: commit the longest common prefix of the last N
  regenerated hypotheses.
* Hold-N: commit everything except the last N tokens of the current
  hypothesis.
* RALCP: position-wise plurality vote over beam candidates, committing while
  the winning token's share of the original candidate pool stays at or above
  ``gamma``; candidates that stop matching are pruned from later positions
  but never leave the denominator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .core import InconsistencyError, StreamState, Token, READ, WRITE
from .models import ScoredHypothesis
import math

WAIT_K_STRIDE_N = "waitk"
LOCAL_AGREEMENT = "la"
HOLD_N = "hold"
RALCP = "ralcp"

POLICY_KINDS = (WAIT_K_STRIDE_N, LOCAL_AGREEMENT, HOLD_N, RALCP)


class ConfigError(Exception):
    """A policy or run configuration is invalid."""


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    K: Optional[int] = None
    N: Optional[int] = None
    gamma: Optional[float] = None
    segment_size: int = 1
    beam_width: int = 1

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.kind == WAIT_K_STRIDE_N:
            if self.K is None or self.K < 1:
                raise ConfigError("wait-k requires K >= 1")
            if self.N is None or self.N < 1:
                raise ConfigError("wait-k-stride-n requires N >= 1")
        if self.kind == LOCAL_AGREEMENT:
            if self.N is None or self.N < 1:
                raise ConfigError("local agreement requires N >= 1")
            if not 1 <= self.segment_size <= 5:
                raise ConfigError("segment_size must lie in [1, 5]")
        if self.kind == HOLD_N and (self.N is None or self.N < 0):
            raise ConfigError("hold-n requires N >= 0")
        if self.kind == RALCP:
            if self.gamma is None or not 0.0 < self.gamma <= 1.0:
                raise ConfigError("ralcp requires gamma in (0, 1]")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")


@dataclass(frozen=True)
class VoteResult:
    """Outcome of a commit vote: tokens to append plus its support."""

    committed_prefix: Tuple[Token, ...]
    support: int
    total: int

    def __post_init__(self) -> None:
        if not 0 <= self.support <= self.total:
            raise InconsistencyError("support must lie in [0, total]")


def wait_k_stride_n_decide(state: StreamState, K: int, N: int) -> str:
    """The Wait-K-Stride-N schedule: returns READ or WRITE.

    After K reads the policy writes N tokens per additional read, which gives
    the closed-form delays g_i = min(|x|, K + (i - 1) // N).  Once the source
    is exhausted only WRITE remains.
    """
    if K < 1 or N < 1:
        raise ConfigError("K and N must be >= 1")
    if state.source_exhausted:
        return WRITE
    j = state.tokens_read
    if j < K:
        return READ
    if len(state.hypothesis) < N * (j - K + 1):
        return WRITE
    return READ


def longest_common_prefix(sequences: Sequence[Sequence[Token]]) -> Tuple[Token, ...]:
    if not sequences:
        return ()
    shortest = min(len(s) for s in sequences)
    out: List[Token] = []
    for i in range(shortest):
        tok = sequences[0][i]
        if all(s[i] == tok for s in sequences):
            out.append(tok)
        else:
            break
    return tuple(out)


def local_agreement_commit(
    recent_hypotheses: Sequence[Sequence[Token]], already_committed: int
) -> VoteResult:
    """Commit the agreed prefix of the last N hypotheses beyond what is out."""
    if not recent_hypotheses:
        raise InconsistencyError("need at least one hypothesis")
    lcp = longest_common_prefix(recent_hypotheses)
    new = lcp[already_committed:]
    n = len(recent_hypotheses)
    return VoteResult(new, n if new else 0, n)


def hold_n_commit(
    hypothesis: Sequence[Token], n: int, already_committed: int
) -> VoteResult:
    """Commit the hypothesis up to its last ``n`` tokens."""
    if n < 0:
        raise ConfigError("hold-n requires N >= 0")
    end = max(already_committed, len(hypothesis) - n)
    new = tuple(hypothesis[already_committed:end])
    return VoteResult(new, 1 if new else 0, 1)


def _vote_threshold_met(count: int, total: int, gamma: float) -> bool:
    # count/total >= gamma, robust to float representation of simple ratios.
    return count + 1e-9 >= gamma * total


def rank_position_votes(
    candidates: Sequence[ScoredHypothesis], position: int
) -> List[Tuple[Token, List[ScoredHypothesis]]]:
    """Tokens at ``position`` ranked by (count, summed probability, surface).

    Candidates shorter than the position abstain.  The ranking is invariant
    under permutation of ``candidates``.
    """
    buckets: Dict[Token, List[ScoredHypothesis]] = {}
    for hyp in candidates:
        if len(hyp.tokens) > position:
            buckets.setdefault(hyp.tokens[position], []).append(hyp)
    return sorted(
        buckets.items(),
        key=lambda kv: (
            -len(kv[1]),
            -math.fsum(math.exp(h.log_score) for h in kv[1]),
            kv[0].surface,
        ),
    )


def ralcp_vote(
    candidates: Sequence[ScoredHypothesis], gamma: float, already_committed: int
) -> VoteResult:
    """Relaxed agreement over beam candidates.

    Walks positions from ``already_committed``; at each one the plurality
    token among surviving candidates wins (ties by the higher summed
    probability of its supporters, then by token surface).  The walk commits
    while the winner's count over the ORIGINAL candidate pool is at least
    ``gamma``; non-matching survivors are pruned but stay in the denominator.
    With ``gamma = 1.0`` this reduces to the strict longest common prefix.
    """
    if not candidates:
        raise InconsistencyError("empty candidate list")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must lie in (0, 1]")
    total = len(candidates)
    survivors = list(candidates)
    committed: List[Token] = []
    support = 0
    position = already_committed
    while True:
        ranked = rank_position_votes(survivors, position)
        if not ranked:
            break
        winner, backers = ranked[0]
        if not _vote_threshold_met(len(backers), total, gamma):
            break
        committed.append(winner)
        support = len(backers)
        survivors = backers
        position += 1
    return VoteResult(tuple(committed), support if committed else 0, total)
