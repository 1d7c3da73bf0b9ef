"""Toy language and translation models with deterministic decoding.

The language model side is a back-off n-gram model with add-alpha smoothing;
continuations are sampled token-by-token from the top-k renormalized
next-token distribution.  The translation side is a family of tabular
translators over token positions:

* ``CopyMT`` copies the source token at the next target position;
* ``LexiconMT`` maps it through a lexicon (out-of-lexicon tokens pass through);
* ``LookaheadMT`` emits the lexicon image of the source token ``delta``
  positions ahead of the target position, which makes anticipation of future
  source tokens provably reduce commit latency.  When that source position is
  not available yet it emits a deliberately low-confidence distribution that
  leans toward stopping, so beams disagree beyond the reliable frontier.

All decoding is deterministic: probability ties are broken by token surface
order, and sampling is driven entirely by the caller-provided seed.
"""
from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Protocol, Sequence, Tuple

from .core import EOS, InconsistencyError, MalformedActionError, Token

_SUM_TOLERANCE = 1e-9


class ModelError(Exception):
    """A model could not produce a distribution for the given input."""


@dataclass(frozen=True)
class NextTokenDistribution:
    """Probability distribution over the next token; must sum to one."""

    probs: Mapping[Token, float]

    def __post_init__(self) -> None:
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise InconsistencyError(f"distribution sums to {total!r}, not 1")
        for p in self.probs.values():
            if p < 0.0:
                raise InconsistencyError("negative probability")

    def sorted_entries(self) -> Tuple[Tuple[Token, float], ...]:
        """Entries by descending probability; ties by token surface."""
        cached = self.__dict__.get("_sorted")
        if cached is None:
            cached = tuple(
                sorted(self.probs.items(), key=lambda kv: (-kv[1], kv[0].surface))
            )
            object.__setattr__(self, "_sorted", cached)
        return cached

    def argmax(self) -> Token:
        return self.sorted_entries()[0][0]


@dataclass(frozen=True)
class Continuation:
    """A sampled extension of the source prefix, at most ``l`` tokens.

    Sampling stops early when the end-of-sentence token is drawn; the EOS
    token is kept as the final element so downstream translators can tell a
    predicted sentence end from a mere truncation.
    """

    tokens: Tuple[Token, ...]
    truncated_at_eos: bool = False

    def __post_init__(self) -> None:
        for i, tok in enumerate(self.tokens):
            if tok.is_eos and i != len(self.tokens) - 1:
                raise MalformedActionError("tokens after end-of-sentence")


@dataclass(frozen=True)
class ScoredHypothesis:
    """A (possibly unfinished) target sequence with its log probability."""

    tokens: Tuple[Token, ...]
    log_score: float

    def __post_init__(self) -> None:
        if self.log_score > 0.0:
            raise InconsistencyError("log score must be <= 0")


class LanguageModel(Protocol):
    def next_distribution(self, context: Sequence[Token]) -> NextTokenDistribution: ...

    def sample_continuations(
        self, context: Sequence[Token], n: int, l: int, k: int, seed: int
    ) -> Tuple[Continuation, ...]: ...


class TranslationModel(Protocol):
    def next_distribution(
        self, source: Sequence[Token], target_prefix: Sequence[Token]
    ) -> NextTokenDistribution: ...

    def beam_search(
        self,
        source: Sequence[Token],
        target_prefix: Sequence[Token],
        beam_width: int,
        max_len: int,
    ) -> Tuple[ScoredHypothesis, ...]: ...


def top_k_entries(
    dist: NextTokenDistribution, k: int, temperature: float = 1.0
) -> Tuple[Tuple[Token, float], ...]:
    """The k most probable tokens, renormalized.

    Rank-k ties are resolved by token surface order.  ``temperature`` rescales
    probabilities as p**(1/T) before renormalization; it never changes which
    tokens survive the cut because the transform is monotone.
    """
    if k < 1:
        raise InconsistencyError("k must be >= 1")
    if temperature <= 0.0:
        raise InconsistencyError("temperature must be positive")
    entries = dist.sorted_entries()[:k]
    if temperature != 1.0:
        entries = tuple((t, p ** (1.0 / temperature)) for t, p in entries)
    total = math.fsum(p for _, p in entries)
    if total <= 0.0:
        raise ModelError("no probability mass among top-k tokens")
    return tuple((t, p / total) for t, p in entries)


def sample_continuations(
    lm: "LanguageModel",
    context: Sequence[Token],
    n: int,
    l: int,
    k: int,
    seed: int,
    temperature: float = 1.0,
) -> Tuple[Continuation, ...]:
    """Draw ``n`` continuations of at most ``l`` tokens from ``lm``.

    Identical arguments always produce identical output: one ``random.Random``
    seeded with ``seed`` drives every draw, continuations are generated in
    order, and each token is drawn by inverse CDF over the top-k entries.
    """
    if n < 1:
        raise InconsistencyError("n must be >= 1")
    if l < 0:
        raise InconsistencyError("l must be >= 0")
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        tokens: list[Token] = []
        hit_eos = False
        for _ in range(l):
            dist = lm.next_distribution(tuple(context) + tuple(tokens))
            entries = top_k_entries(dist, k, temperature)
            pick = rng.random()
            acc = 0.0
            chosen = entries[-1][0]
            for tok, p in entries:
                acc += p
                if pick < acc:
                    chosen = tok
                    break
            tokens.append(chosen)
            if chosen.is_eos:
                hit_eos = True
                break
        out.append(Continuation(tuple(tokens), truncated_at_eos=hit_eos))
    return tuple(out)


def mt_beam_search(
    mt: "TranslationModel",
    source: Sequence[Token],
    target_prefix: Sequence[Token],
    beam_width: int,
    max_len: int,
) -> Tuple[ScoredHypothesis, ...]:
    """Deterministic prefix-constrained beam search.

    Every returned hypothesis starts with ``target_prefix``; ``max_len``
    bounds the number of generated tokens beyond the prefix (an emitted EOS
    counts).  Hypotheses that emit EOS are moved to the finished pool and no
    longer expanded; the final ranking pools finished and still-open
    hypotheses by log score, ties broken by token surfaces.  With
    ``beam_width=1`` this is greedy decoding.
    """
    if beam_width < 1:
        raise InconsistencyError("beam_width must be >= 1")
    if max_len < 0:
        raise InconsistencyError("max_len must be >= 0")
    prefix = tuple(target_prefix)

    def sort_key(entry: Tuple[float, Tuple[Token, ...]]):
        score, tokens = entry
        return (-score, tuple(t.surface for t in tokens))

    live: list[Tuple[float, Tuple[Token, ...]]] = [(0.0, prefix)]
    finished: list[Tuple[float, Tuple[Token, ...]]] = []
    for _ in range(max_len):
        if not live:
            break
        children: list[Tuple[float, Tuple[Token, ...]]] = []
        for score, tokens in live:
            dist = mt.next_distribution(source, tokens)
            for tok, p in dist.sorted_entries()[:beam_width]:
                if p <= 0.0:
                    continue
                child = (score + math.log(p), tokens + (tok,))
                if tok.is_eos:
                    finished.append(child)
                else:
                    children.append(child)
        live = sorted(children, key=sort_key)[:beam_width]
    pool = sorted(finished + live, key=sort_key)[:beam_width]
    return tuple(ScoredHypothesis(tokens, score) for score, tokens in pool)


def _count_ngrams(
    sentences: Iterable[Sequence[Token]], order: int
) -> Tuple[Dict[Tuple[str, ...], Counter], Dict[Tuple[str, ...], int], Tuple[Token, ...]]:
    counts: Dict[Tuple[str, ...], Counter] = {}
    totals: Dict[Tuple[str, ...], int] = {}
    vocab = {EOS}
    for sentence in sentences:
        stream = tuple(sentence) + (EOS,)
        vocab.update(stream)
        surfaces = tuple(t.surface for t in stream)
        for pos, word in enumerate(surfaces):
            for m in range(min(order - 1, pos) + 1):
                ctx = surfaces[pos - m : pos]
                counts.setdefault(ctx, Counter())[word] += 1
                totals[ctx] = totals.get(ctx, 0) + 1
    ordered = tuple(sorted(vocab, key=lambda t: t.surface))
    return counts, totals, ordered


class NgramLm:
    """Back-off n-gram model with add-alpha smoothing.

    The longest seen context suffix (up to ``order - 1`` tokens) is used; an
    unseen context backs off to shorter suffixes and ultimately to the
    unigram distribution.  Within a context, ``P(w) = (c + alpha) /
    (total + alpha * V)`` over the training vocabulary plus EOS; with
    ``alpha = 0`` this is the exact empirical conditional.
    """

    def __init__(
        self, sentences: Iterable[Sequence[Token]], order: int, alpha: float
    ) -> None:
        if order < 1:
            raise InconsistencyError("order must be >= 1")
        if alpha < 0.0:
            raise InconsistencyError("alpha must be >= 0")
        self.order = order
        self.alpha = alpha
        self._counts, self._totals, self.vocab = _count_ngrams(sentences, order)
        if not self._totals.get((), 0):
            raise ModelError("empty training corpus")
        self._by_surface = {t.surface: t for t in self.vocab}
        self._cache: Dict[Tuple[str, ...], NextTokenDistribution] = {}

    def _distribution_for(self, ctx: Tuple[str, ...]) -> NextTokenDistribution:
        cached = self._cache.get(ctx)
        if cached is not None:
            return cached
        counter = self._counts[ctx]
        total = self._totals[ctx]
        v = len(self.vocab)
        denom = total + self.alpha * v
        probs: Dict[Token, float] = {}
        for tok in self.vocab:
            p = (counter.get(tok.surface, 0) + self.alpha) / denom
            if p > 0.0:
                probs[tok] = p
        dist = NextTokenDistribution(probs)
        self._cache[ctx] = dist
        return dist

    def next_distribution(self, context: Sequence[Token]) -> NextTokenDistribution:
        surfaces = tuple(t.surface for t in context)
        longest = min(len(surfaces), self.order - 1)
        for m in range(longest, -1, -1):
            ctx = surfaces[len(surfaces) - m :]
            if self._totals.get(ctx, 0) > 0:
                return self._distribution_for(ctx)
        return self._distribution_for(())

    def sample_continuations(
        self,
        context: Sequence[Token],
        n: int,
        l: int,
        k: int,
        seed: int,
        temperature: float = 1.0,
    ) -> Tuple[Continuation, ...]:
        return sample_continuations(self, context, n, l, k, seed, temperature)


def fit_ngram_lm(
    corpus: Iterable[Sequence[Token]], order: int, alpha: float
) -> NgramLm:
    return NgramLm(corpus, order, alpha)


def _strip_sentinel(source: Sequence[Token]) -> Tuple[Tuple[Token, ...], bool]:
    core = tuple(t for t in source if not t.is_eos)
    complete = any(t.is_eos for t in source)
    return core, complete


def _peaked(
    peak: Token, vocab: Sequence[Token], epsilon: float
) -> NextTokenDistribution:
    others = [t for t in vocab if t != peak]
    if not others:
        return NextTokenDistribution({peak: 1.0})
    probs = {t: epsilon / len(others) for t in others}
    probs[peak] = 1.0 - epsilon
    return NextTokenDistribution(probs)


class _PositionalMt:
    """Shared machinery for the tabular translators.

    Subclasses resolve the peak token for a target position; resolution may
    fail when the needed source position has not been received yet.  Built
    distributions are memoized per peak token, so repeated decoding over the
    same language costs dictionary lookups only.
    """

    epsilon = 0.01

    def _vocab(self, core: Sequence[Token]) -> Tuple[Token, ...]:
        raise NotImplementedError

    def _resolve(
        self, core: Tuple[Token, ...], complete: bool, position: int
    ) -> Optional[Token]:
        raise NotImplementedError

    def _placeholder(self, vocab: Sequence[Token]) -> NextTokenDistribution:
        # Low-confidence stand-in when the needed source is unseen: mild
        # preference for stopping, the rest spread evenly, so no guess is
        # ever confident enough to survive a vote.
        non_eos = [t for t in vocab if not t.is_eos]
        probs: Dict[Token, float] = {EOS: 0.2}
        for t in non_eos:
            probs[t] = 0.8 / len(non_eos)
        return NextTokenDistribution(probs)

    def next_distribution(
        self, source: Sequence[Token], target_prefix: Sequence[Token]
    ) -> NextTokenDistribution:
        core, complete = _strip_sentinel(source)
        vocab = self._vocab(core)
        peak = self._resolve(core, complete, len(target_prefix))
        # Distributions over the model's fixed vocabulary repeat constantly
        # during beam search; memoize them per peak token.
        stable = vocab is getattr(self, "_base_vocab", None)
        key = peak.surface if peak is not None else None
        if stable:
            memo = self.__dict__.setdefault("_memo", {})
            hit = memo.get(key)
            if hit is not None:
                return hit
        if peak is None:
            dist = self._placeholder(vocab)
        else:
            if peak not in vocab:
                vocab = tuple(sorted(set(vocab) | {peak}, key=lambda t: t.surface))
                stable = False
            dist = _peaked(peak, vocab, self.epsilon)
        if stable:
            memo[key] = dist
        return dist

    def beam_search(
        self,
        source: Sequence[Token],
        target_prefix: Sequence[Token],
        beam_width: int,
        max_len: int,
    ) -> Tuple[ScoredHypothesis, ...]:
        return mt_beam_search(self, source, target_prefix, beam_width, max_len)


class CopyMt(_PositionalMt):
    """Copies the source token at the next target position; EOS past the end."""

    def __init__(self, epsilon: float = 0.01) -> None:
        self.epsilon = epsilon

    def _vocab(self, core: Sequence[Token]) -> Tuple[Token, ...]:
        return tuple(sorted(set(core) | {EOS}, key=lambda t: t.surface))

    def _resolve(
        self, core: Tuple[Token, ...], complete: bool, position: int
    ) -> Optional[Token]:
        if position < len(core):
            return core[position]
        return EOS


class LexiconMt(_PositionalMt):
    """Token-for-token lexicon translation; out-of-lexicon tokens pass through."""

    def __init__(self, lexicon: Mapping[str, str], epsilon: float = 0.01) -> None:
        self.epsilon = epsilon
        self.lexicon = dict(lexicon)

    def _image(self, token: Token) -> Token:
        return Token(self.lexicon.get(token.surface, token.surface))

    def _vocab(self, core: Sequence[Token]) -> Tuple[Token, ...]:
        images = {self._image(t) for t in core}
        return tuple(sorted(images | {EOS}, key=lambda t: t.surface))

    def _resolve(
        self, core: Tuple[Token, ...], complete: bool, position: int
    ) -> Optional[Token]:
        if position < len(core):
            return self._image(core[position])
        return EOS


class LookaheadMt(_PositionalMt):
    """Target position ``i`` is the lexicon image of source position ``i + delta``.

    Once the source is known to be complete, positions past the end resolve to
    per-offset end markers (the images of the sentence-final markers) and the
    position after the last marker resolves to EOS.  While the source is still
    partial, unresolvable positions yield the low-confidence placeholder.
    """

    def __init__(
        self,
        lexicon: Mapping[str, str],
        delta: int,
        epsilon: float = 0.01,
        end_marker_images: Optional[Sequence[str]] = None,
    ) -> None:
        if delta < 0:
            raise InconsistencyError("delta must be >= 0")
        self.epsilon = epsilon
        self.lexicon = dict(lexicon)
        self.delta = delta
        if end_marker_images is None:
            end_marker_images = tuple(f"end{r}" for r in range(1, delta + 1))
        if len(end_marker_images) != delta:
            raise InconsistencyError("need exactly delta end marker images")
        self.end_markers = tuple(Token(s) for s in end_marker_images)
        images = sorted(
            set(self.lexicon.values()) | {t.surface for t in self.end_markers}
        )
        self._base_vocab = tuple(Token(s) for s in images) + (EOS,)
        self._base_vocab = tuple(
            sorted(set(self._base_vocab), key=lambda t: t.surface)
        )

    def _image(self, token: Token) -> Token:
        return Token(self.lexicon.get(token.surface, token.surface))

    def _vocab(self, core: Sequence[Token]) -> Tuple[Token, ...]:
        extra = {self._image(t) for t in core if t.surface not in self.lexicon}
        if not extra:
            return self._base_vocab
        return tuple(
            sorted(set(self._base_vocab) | extra, key=lambda t: t.surface)
        )

    def _resolve(
        self, core: Tuple[Token, ...], complete: bool, position: int
    ) -> Optional[Token]:
        wanted = position + self.delta
        if wanted < len(core):
            return self._image(core[wanted])
        if not complete:
            return None
        if position >= len(core):
            return EOS
        return self.end_markers[wanted - len(core)]
