"""Incremental decoding primitives shared by every policy.

A simultaneous decoder interleaves READ actions (consume one source token)
with WRITE actions (emit one or more target tokens).  The state after any
prefix of actions is a ``StreamState``; a finished sentence is a
``Trajectory``.  Each written token records its delay: the number of real
source tokens that had been read when it was emitted.  The end of the source
stream is signalled by a reserved sentinel token; reading the sentinel flips
``source_exhausted`` and does not count toward delays, so delays never exceed
the true source length.

``trajectory_probability`` scores a trajectory under the decomposition

    P(y, g | x) = prod_i  P_mt(y_i | x_{1:g_i}, y_{1:i-1})
                        * pi(write steps) * prod (1 - pi)(read steps)

where ``pi`` is the policy's per-step write probability.  Rule-forced steps
(initial waits, post-exhaustion writes) contribute probability one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

EOS_SURFACE = "</s>"


class SimulstreamError(Exception):
    """Base class for engine errors."""


class PreconditionError(SimulstreamError):
    """An operation was applied to a state that does not admit it."""


class MalformedActionError(SimulstreamError):
    """An action violates its structural invariants."""


class InconsistencyError(SimulstreamError):
    """Parallel sequences that must agree in length or content do not."""


@dataclass(frozen=True)
class Token:
    """One vocabulary item; ``is_eos`` marks the reserved end-of-sentence token."""

    surface: str
    is_eos: bool = False

    def __post_init__(self) -> None:
        if not self.surface and not self.is_eos:
            raise MalformedActionError("token surface must be non-empty")


EOS = Token(EOS_SURFACE, True)


def tokenize(text: str) -> tuple[Token, ...]:
    """Whitespace tokenization; the reserved surface maps to the EOS token."""
    return tuple(EOS if part == EOS_SURFACE else Token(part) for part in text.split())


def detokenize(tokens: Sequence[Token]) -> str:
    return " ".join(t.surface for t in tokens if not t.is_eos)


READ = "READ"
WRITE = "WRITE"


@dataclass(frozen=True)
class Action:
    """READ consumes one source token; WRITE emits ``tokens``.

    ``confidence`` is the policy score that triggered the action (1.0 for
    rule-forced actions, e.g. initial waits and post-exhaustion writes).
    """

    kind: str
    tokens: tuple[Token, ...] = ()
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (READ, WRITE):
            raise MalformedActionError(f"unknown action kind {self.kind!r}")
        if self.kind == READ and self.tokens:
            raise MalformedActionError("READ carries no tokens")
        if self.kind == WRITE and not self.tokens:
            raise MalformedActionError("WRITE requires at least one token")
        if not 0.0 <= self.confidence <= 1.0:
            raise MalformedActionError("confidence must lie in [0, 1]")
        # Nothing may follow an end-of-sentence token inside one WRITE.
        for i, tok in enumerate(self.tokens):
            if tok.is_eos and i != len(self.tokens) - 1:
                raise MalformedActionError("tokens after end-of-sentence in WRITE")


@dataclass(frozen=True)
class StreamState:
    """Decoder state: source consumed so far, hypothesis committed so far."""

    source_read: tuple[Token, ...] = ()
    hypothesis: tuple[Token, ...] = ()
    delays: tuple[int, ...] = ()
    source_exhausted: bool = False

    @property
    def tokens_read(self) -> int:
        """Number of real (non-sentinel) source tokens consumed."""
        return len(self.source_read) - (1 if self.source_exhausted else 0)


def apply_action(
    state: StreamState, action: Action, next_source: Optional[Token] = None
) -> StreamState:
    """Pure transition function; returns a new state.

    READ requires ``next_source`` and an unexhausted stream.  WRITE appends
    each non-EOS token with delay ``state.tokens_read``; a trailing EOS token
    terminates the hypothesis and is not appended, so hypotheses stay plain
    text.  Delays are therefore non-decreasing and bounded by the real source
    length.
    """
    if action.kind == READ:
        if state.source_exhausted:
            raise PreconditionError("READ after source exhausted")
        if next_source is None:
            raise PreconditionError("READ requires the next source token")
        return StreamState(
            source_read=state.source_read + (next_source,),
            hypothesis=state.hypothesis,
            delays=state.delays,
            source_exhausted=next_source.is_eos,
        )
    delay = state.tokens_read
    new_tokens = tuple(t for t in action.tokens if not t.is_eos)
    return StreamState(
        source_read=state.source_read,
        hypothesis=state.hypothesis + new_tokens,
        delays=state.delays + (delay,) * len(new_tokens),
        source_exhausted=state.source_exhausted,
    )


@dataclass(frozen=True)
class StepRecord:
    """Per-step diagnostics kept alongside the action log."""

    step_index: int
    kind: str
    pi: float = 0.0
    pool_size: int = 0
    committed: int = 0
    note: str = ""


@dataclass(frozen=True)
class Trajectory:
    sentence_id: str
    actions: tuple[Action, ...]
    final_hypothesis: tuple[Token, ...]
    delays: tuple[int, ...]
    step_log: tuple[StepRecord, ...] = ()

    def __post_init__(self) -> None:
        if len(self.final_hypothesis) != len(self.delays):
            raise InconsistencyError("hypothesis and delays must align")


def replay(actions: Iterable[Action], source: Sequence[Token]) -> StreamState:
    """Fold actions over an empty state, drawing READs from ``source``."""
    state = StreamState()
    cursor = 0
    for action in actions:
        if action.kind == READ:
            if cursor >= len(source):
                raise PreconditionError("READ past end of source stream")
            state = apply_action(state, action, source[cursor])
            cursor += 1
        else:
            state = apply_action(state, action)
    return state


def trajectory_probability(
    trajectory: Trajectory,
    mt_probs: Sequence[float],
    policy_probs: Sequence[float],
) -> float:
    """Probability of one (hypothesis, delays) pair under the decomposition
    in the module docstring.

    ``mt_probs`` holds one translation probability per written token (in
    emission order, EOS included when written); ``policy_probs`` holds one
    write probability per action.  Rule-forced actions should be passed as
    probability one.
    """
    if len(policy_probs) != len(trajectory.actions):
        raise InconsistencyError(
            f"{len(policy_probs)} policy probs for {len(trajectory.actions)} actions"
        )
    written = sum(len(a.tokens) for a in trajectory.actions if a.kind == WRITE)
    if len(mt_probs) != written:
        raise InconsistencyError(f"{len(mt_probs)} mt probs for {written} written tokens")
    for p in list(mt_probs) + list(policy_probs):
        if not 0.0 <= p <= 1.0:
            raise InconsistencyError("probabilities must lie in [0, 1]")
    prob = 1.0
    cursor = 0
    for action, pi in zip(trajectory.actions, policy_probs):
        if action.kind == READ:
            prob *= 1.0 - pi
        else:
            prob *= pi
            for _ in action.tokens:
                prob *= mt_probs[cursor]
                cursor += 1
    return prob


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "sentence_id": trajectory.sentence_id,
        "actions": [
            {
                "kind": a.kind,
                "tokens": [t.surface for t in a.tokens],
                "confidence": a.confidence,
            }
            for a in trajectory.actions
        ],
        "hypothesis": [t.surface for t in trajectory.final_hypothesis],
        "delays": list(trajectory.delays),
    }


def trajectory_from_dict(payload: dict) -> Trajectory:
    actions = tuple(
        Action(
            kind=entry["kind"],
            tokens=tuple(
                EOS if s == EOS_SURFACE else Token(s) for s in entry["tokens"]
            ),
            confidence=entry["confidence"],
        )
        for entry in payload["actions"]
    )
    return Trajectory(
        sentence_id=payload["sentence_id"],
        actions=actions,
        final_hypothesis=tuple(Token(s) for s in payload["hypothesis"]),
        delays=tuple(int(d) for d in payload["delays"]),
    )


def write_trajectories(trajectories: Iterable[Trajectory], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for trajectory in trajectories:
            handle.write(json.dumps(trajectory_to_dict(trajectory)) + "\n")


def read_trajectories(path: str) -> Iterator[Trajectory]:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield trajectory_from_dict(json.loads(line))
