from __future__ import annotations

import json

import pytest

from simulstream.core import (
    EOS,
    EOS_SURFACE,
    READ,
    WRITE,
    Action,
    MalformedActionError,
    PreconditionError,
    StreamState,
    Token,
    Trajectory,
    apply_action,
    detokenize,
    read_trajectories,
    replay,
    tokenize,
    trajectory_from_dict,
    trajectory_probability,
    trajectory_to_dict,
    write_trajectories,
)


def toks(text: str):
    return tokenize(text)


def test_tokenize_roundtrip():
    assert detokenize(toks("a b c")) == "a b c"
    assert toks("") == ()


def test_tokenize_maps_reserved_surface_to_eos():
    tokens = toks(f"a {EOS_SURFACE}")
    assert tokens[1] is EOS
    assert tokens[1].is_eos
    # detokenize drops the terminator
    assert detokenize(tokens) == "a"


def test_token_requires_surface():
    with pytest.raises(MalformedActionError):
        Token("")


def test_action_validation():
    with pytest.raises(MalformedActionError):
        Action("PEEK")
    with pytest.raises(MalformedActionError):
        Action(READ, (Token("x"),))
    with pytest.raises(MalformedActionError):
        Action(WRITE)
    with pytest.raises(MalformedActionError):
        Action(WRITE, (Token("x"),), confidence=1.5)
    with pytest.raises(MalformedActionError):
        Action(WRITE, (EOS, Token("x")))
    # EOS in final position is fine
    Action(WRITE, (Token("x"), EOS))


def test_apply_action_read_and_write():
    state = StreamState()
    state = apply_action(state, Action(READ), Token("a"))
    state = apply_action(state, Action(READ), Token("b"))
    assert state.tokens_read == 2
    state = apply_action(state, Action(WRITE, toks("x y")))
    assert state.hypothesis == toks("x y")
    assert state.delays == (2, 2)
    # sentinel read flips exhaustion and does not count as a token
    state = apply_action(state, Action(READ), EOS)
    assert state.source_exhausted
    assert state.tokens_read == 2
    state = apply_action(state, Action(WRITE, (Token("z"), EOS)))
    assert state.delays == (2, 2, 2)
    # EOS itself never lands in the hypothesis
    assert [t.surface for t in state.hypothesis] == ["x", "y", "z"]


def test_read_guards():
    state = StreamState()
    with pytest.raises(PreconditionError):
        apply_action(state, Action(READ))
    state = apply_action(state, Action(READ), EOS)
    with pytest.raises(PreconditionError):
        apply_action(state, Action(READ), Token("a"))


def test_replay_matches_manual_fold():
    source = toks("a b") + (EOS,)
    actions = (
        Action(READ),
        Action(WRITE, toks("x")),
        Action(READ),
        Action(READ),
        Action(WRITE, (Token("y"), EOS)),
    )
    state = replay(actions, source)
    assert state.hypothesis == toks("x y")
    assert state.delays == (1, 2)
    assert state.source_exhausted
    with pytest.raises(PreconditionError):
        replay((Action(READ), Action(READ)), toks("a"))


def test_trajectory_alignment_checked():
    with pytest.raises(Exception):
        Trajectory("0", (Action(WRITE, toks("x")),), toks("x y"), (1,))


def test_trajectory_probability_hand_case():
    # READ (pi=.4) -> WRITE a (pi=.7, P=.5) -> READ (pi=.2) -> WRITE b eos
    # (forced: pi=1, P=.6 * .9)
    actions = (
        Action(READ),
        Action(WRITE, toks("a")),
        Action(READ),
        Action(WRITE, (Token("b"), EOS)),
    )
    traj = Trajectory("0", actions, toks("a b"), (1, 2))
    prob = trajectory_probability(traj, [0.5, 0.6, 0.9], [0.4, 0.7, 0.2, 1.0])
    expected = (1 - 0.4) * (0.7 * 0.5) * (1 - 0.2) * (1.0 * 0.6 * 0.9)
    assert prob == pytest.approx(expected, abs=1e-12)


def test_trajectory_probability_validates_lengths():
    traj = Trajectory("0", (Action(WRITE, toks("a")),), toks("a"), (0,))
    with pytest.raises(Exception):
        trajectory_probability(traj, [], [1.0])
    with pytest.raises(Exception):
        trajectory_probability(traj, [0.5], [1.0, 1.0])


def test_trajectory_jsonl_roundtrip(tmp_path):
    actions = (
        Action(READ),
        Action(WRITE, toks("x y"), confidence=0.75),
        Action(READ),
        Action(WRITE, (EOS,), confidence=1.0),
    )
    traj = Trajectory("s1", actions, toks("x y"), (1, 1))
    payload = trajectory_to_dict(traj)
    assert set(payload) == {"sentence_id", "actions", "hypothesis", "delays"}
    assert payload["actions"][1]["tokens"] == ["x", "y"]
    assert payload["actions"][3]["tokens"] == [EOS_SURFACE]
    back = trajectory_from_dict(json.loads(json.dumps(payload)))
    assert back == traj

    path = tmp_path / "t.jsonl"
    write_trajectories([traj, traj], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    loaded = list(read_trajectories(path))
    assert loaded == [traj, traj]
