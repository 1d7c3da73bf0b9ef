"""Backend construction from command-line model specs.

A spec is ``kind`` or ``kind:key=value,key=value``.  Language model kinds:

* ``ngram:corpus=PATH[,order=N,alpha=F]`` fits the n-gram model on a text
  file, one sentence per line;
* ``echo`` repeats the context tail in every continuation, deterministic
  regardless of seed.  Useful for protocol tests and smoke checks.

Translation kinds: ``copy[:epsilon=F]``, ``lexicon:lexicon=PATH[,epsilon=F]``
and ``lookahead:lexicon=PATH[,delta=N,epsilon=F]``.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence, Tuple

from simulstream.core import Token, tokenize
from simulstream.harness import load_lexicon
from simulstream.models import (
    Continuation,
    CopyMt,
    LexiconMt,
    LookaheadMt,
    ModelError,
    NextTokenDistribution,
    fit_ngram_lm,
)


class BackendSpecError(ValueError):
    """A model spec could not be parsed or built."""


def parse_spec(spec: str) -> tuple[str, dict[str, str]]:
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    if not kind:
        raise BackendSpecError("empty model spec")
    options: dict[str, str] = {}
    if rest.strip():
        for part in rest.split(","):
            key, eq, value = part.partition("=")
            if not eq or not key.strip():
                raise BackendSpecError(f"bad option {part!r} in spec {spec!r}")
            options[key.strip()] = value.strip()
    return kind, options


def _reject_unknown(options: dict[str, str], allowed: set[str], spec: str) -> None:
    unknown = sorted(set(options) - allowed)
    if unknown:
        raise BackendSpecError(f"unknown options {unknown} in spec {spec!r}")


def _number(options: dict[str, str], key: str, default: str, cast, spec: str):
    try:
        return cast(options.get(key, default))
    except ValueError as exc:
        raise BackendSpecError(f"option {key} in spec {spec!r}: {exc}") from exc


class EchoLm:
    """Deterministic stub: every continuation repeats the context tail."""

    def next_distribution(self, context: Sequence[Token]) -> NextTokenDistribution:
        raise ModelError("echo backend has no distribution")

    def sample_continuations(
        self,
        context: Sequence[Token],
        n: int,
        l: int,
        k: int,
        seed: int,
        temperature: float = 1.0,
    ) -> Tuple[Continuation, ...]:
        core = tuple(t for t in context if not t.is_eos)
        tail = core[-l:] if l > 0 else ()
        return tuple(Continuation(tail) for _ in range(n))


def build_lm(spec: str):
    kind, options = parse_spec(spec)
    if kind == "echo":
        _reject_unknown(options, set(), spec)
        return EchoLm()
    if kind == "ngram":
        _reject_unknown(options, {"corpus", "order", "alpha"}, spec)
        corpus = options.get("corpus")
        if not corpus:
            raise BackendSpecError(f"spec {spec!r} needs corpus=PATH")
        try:
            lines = Path(corpus).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise BackendSpecError(f"cannot read corpus {corpus!r}: {exc}") from exc
        sentences = [tokenize(line) for line in lines if line.strip()]
        return fit_ngram_lm(
            sentences,
            order=_number(options, "order", "3", int, spec),
            alpha=_number(options, "alpha", "0.1", float, spec),
        )
    raise BackendSpecError(f"unknown language model kind {kind!r}")


def build_mt(spec: str):
    kind, options = parse_spec(spec)
    if kind == "copy":
        _reject_unknown(options, {"epsilon"}, spec)
        return CopyMt(epsilon=_number(options, "epsilon", "0.01", float, spec))
    if kind in ("lexicon", "lookahead"):
        allowed = {"lexicon", "epsilon"} | ({"delta"} if kind == "lookahead" else set())
        _reject_unknown(options, allowed, spec)
        lexicon_path = options.get("lexicon")
        if not lexicon_path:
            raise BackendSpecError(f"spec {spec!r} needs lexicon=PATH")
        try:
            lexicon = load_lexicon(lexicon_path)
        except OSError as exc:
            raise BackendSpecError(
                f"cannot read lexicon {lexicon_path!r}: {exc}"
            ) from exc
        epsilon = _number(options, "epsilon", "0.01", float, spec)
        if kind == "lexicon":
            return LexiconMt(lexicon, epsilon=epsilon)
        return LookaheadMt(
            lexicon,
            delta=_number(options, "delta", "2", int, spec),
            epsilon=epsilon,
        )
    raise BackendSpecError(f"unknown translation model kind {kind!r}")
