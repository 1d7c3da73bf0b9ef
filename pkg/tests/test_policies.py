from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, strategies as st

from simulstream.core import EOS, StreamState, Token, READ, WRITE, apply_action, Action, tokenize
from simulstream.models import ScoredHypothesis
from simulstream.policies import (
    ConfigError,
    PolicyConfig,
    VoteResult,
    hold_n_commit,
    local_agreement_commit,
    longest_common_prefix,
    ralcp_vote,
    rank_position_votes,
    wait_k_stride_n_decide,
)


def T(s: str) -> Token:
    return Token(s)


def hyp(text: str, p: float) -> ScoredHypothesis:
    return ScoredHypothesis(tokenize(text), math.log(p))


# --- configuration --------------------------------------------------------


def test_policy_config_validation():
    PolicyConfig("waitk", K=3, N=1)
    PolicyConfig("la", N=2, segment_size=5)
    PolicyConfig("hold", N=0)
    PolicyConfig("ralcp", gamma=1.0, beam_width=40)
    with pytest.raises(ConfigError):
        PolicyConfig("nope")
    with pytest.raises(ConfigError):
        PolicyConfig("waitk", K=0, N=1)
    with pytest.raises(ConfigError):
        PolicyConfig("waitk", K=3)
    with pytest.raises(ConfigError):
        PolicyConfig("la", N=1, segment_size=6)
    with pytest.raises(ConfigError):
        PolicyConfig("hold", N=-1)
    with pytest.raises(ConfigError):
        PolicyConfig("ralcp", gamma=0.0)
    with pytest.raises(ConfigError):
        PolicyConfig("ralcp", gamma=1.2)
    with pytest.raises(ConfigError):
        PolicyConfig("ralcp", gamma=0.5, beam_width=0)


def test_vote_result_support_bounds():
    with pytest.raises(Exception):
        VoteResult((), 3, 2)


# --- wait-k stride-n ------------------------------------------------------


def _drive_schedule(K: int, N: int, source_len: int, target_len: int):
    """Follow the schedule with dummy tokens; return per-token delays."""
    state = StreamState()
    delays = []
    cursor = 0
    while len(delays) < target_len:
        kind = wait_k_stride_n_decide(state, K, N)
        if kind == READ:
            nxt = T(f"s{cursor}") if cursor < source_len else EOS
            cursor += 1
            state = apply_action(state, Action(READ), nxt)
        else:
            state = apply_action(state, Action(WRITE, (T("t"),)))
            delays.append(state.delays[-1])
    return delays


@pytest.mark.parametrize("K,N", [(1, 1), (3, 1), (3, 2), (2, 3)])
def test_waitk_stride_n_closed_form(K, N):
    source_len, target_len = 7, 7
    delays = _drive_schedule(K, N, source_len, target_len)
    expected = [min(source_len, K + (i - 1) // N) for i in range(1, target_len + 1)]
    assert delays == expected


def test_waitk_requires_valid_parameters():
    with pytest.raises(ConfigError):
        wait_k_stride_n_decide(StreamState(), 0, 1)


def test_waitk_writes_after_exhaustion():
    state = apply_action(StreamState(), Action(READ), EOS)
    assert wait_k_stride_n_decide(state, 5, 1) == WRITE


# --- longest common prefix ------------------------------------------------


def lcp_reference(seqs):
    out = []
    for column in zip(*seqs):
        if all(tok == column[0] for tok in column):
            out.append(column[0])
        else:
            break
    return tuple(out)


@given(
    st.lists(
        st.lists(st.sampled_from("abc"), min_size=0, max_size=6),
        min_size=1,
        max_size=5,
    )
)
def test_lcp_matches_reference(raw):
    seqs = [tuple(T(c) for c in s) for s in raw]
    assert longest_common_prefix(seqs) == lcp_reference(seqs)


def test_lcp_empty_input():
    assert longest_common_prefix([]) == ()


# --- local agreement ------------------------------------------------------


def test_local_agreement_commits_new_lcp_only():
    hyps = [tokenize("x y z"), tokenize("x y w")]
    vote = local_agreement_commit(hyps, already_committed=1)
    assert vote.committed_prefix == tokenize("y")
    assert (vote.support, vote.total) == (2, 2)
    stale = local_agreement_commit(hyps, already_committed=2)
    assert stale.committed_prefix == ()
    assert (stale.support, stale.total) == (0, 2)


def test_local_agreement_needs_input():
    with pytest.raises(Exception):
        local_agreement_commit([], 0)


# --- hold-n ----------------------------------------------------------------


def test_hold_n_commit_cases():
    hypothesis = tokenize("a b c d")
    assert hold_n_commit(hypothesis, 2, 1).committed_prefix == tokenize("b")
    assert hold_n_commit(hypothesis, 0, 1).committed_prefix == tokenize("b c d")
    empty = hold_n_commit(hypothesis, 5, 1)
    assert empty.committed_prefix == ()
    assert (empty.support, empty.total) == (0, 1)


# --- relaxed agreement (ralcp) ---------------------------------------------


def test_ralcp_hand_traced_votes():
    pool = [
        hyp("x y", 0.5),
        hyp("x y", 0.4),
        hyp("x z", 0.3),
        hyp("w", 0.2),
    ]
    vote = ralcp_vote(pool, gamma=0.5, already_committed=0)
    assert vote.committed_prefix == tokenize("x y")
    assert (vote.support, vote.total) == (2, 4)

    strict = ralcp_vote(pool, gamma=0.8, already_committed=0)
    assert strict.committed_prefix == ()
    assert (strict.support, strict.total) == (0, 4)


def test_ralcp_prunes_but_keeps_denominator():
    # after committing "x" only 2 of 4 survive; gamma .5 still measures /4
    pool = [
        hyp("x a a", 0.4),
        hyp("x a a", 0.3),
        hyp("x b", 0.2),
        hyp("y", 0.1),
    ]
    vote = ralcp_vote(pool, gamma=0.5, already_committed=0)
    # position 1: "a" backed by 2 of the ORIGINAL 4 -> exactly gamma
    assert vote.committed_prefix == tokenize("x a a")
    assert (vote.support, vote.total) == (2, 4)


def test_ralcp_tie_breaks_by_probability_then_surface():
    by_prob = ralcp_vote([hyp("a", 0.3), hyp("b", 0.5)], 0.5, 0)
    assert by_prob.committed_prefix == tokenize("b")
    by_surface = ralcp_vote([hyp("b", 0.4), hyp("a", 0.4)], 0.5, 0)
    assert by_surface.committed_prefix == tokenize("a")


def test_ralcp_threshold_robust_to_float_noise():
    # 11/20 >= 0.55 must hold despite 0.55 * 20 > 11 in floats
    pool = [hyp("v", 0.5)] * 11 + [hyp("u", 0.5)] * 9
    vote = ralcp_vote(pool, gamma=0.55, already_committed=0)
    assert vote.committed_prefix == tokenize("v")


def test_ralcp_already_committed_offsets_position():
    pool = [hyp("x y", 0.5), hyp("x z", 0.5)]
    vote = ralcp_vote(pool, gamma=0.5, already_committed=1)
    # position 1 splits 1-1; share 0.5 meets gamma; winner by surface
    assert vote.committed_prefix == tokenize("y")


def test_ralcp_validates_inputs():
    with pytest.raises(Exception):
        ralcp_vote([], 0.5, 0)
    with pytest.raises(ConfigError):
        ralcp_vote([hyp("a", 0.5)], 0.0, 0)


def test_ralcp_gamma_one_is_strict_lcp_small_scale():
    rng = random.Random(5)
    for _ in range(200):
        pool = []
        for _ in range(rng.randint(1, 6)):
            length = rng.randint(0, 4)
            text = " ".join(rng.choice("pq") for _ in range(length))
            tokens = tokenize(text)
            pool.append(ScoredHypothesis(tokens, math.log(rng.uniform(0.05, 1.0))))
        vote = ralcp_vote(pool, gamma=1.0, already_committed=0)
        assert vote.committed_prefix == lcp_reference([h.tokens for h in pool])


def test_rank_position_votes_abstention():
    pool = [hyp("a b", 0.5), hyp("a", 0.5)]
    ranked = rank_position_votes(pool, 1)
    assert len(ranked) == 1
    token, backers = ranked[0]
    assert token == T("b")
    assert len(backers) == 1
    assert rank_position_votes(pool, 5) == []
