"""Driving loop: feed sentences through an engine and score the output.

The harness owns everything around a policy step: supplying source tokens
(with the end-of-stream sentinel), per-step seed derivation, the document
context window, hypothesis length caps, and collecting trajectories into
corpus-level metrics.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .core import (
    EOS,
    Action,
    InconsistencyError,
    StreamState,
    Token,
    Trajectory,
    WRITE,
    apply_action,
    tokenize,
)
from .engines import Engine, ModelsBundle, StepContext, build_engine
from .metrics import WORD, average_lagging, bleu, convert_delays, laal
from .models import (
    CopyMt,
    LexiconMt,
    LookaheadMt,
    fit_ngram_lm,
)
from .policies import ConfigError, PolicyConfig
from .taf import TafConfig


@dataclass(frozen=True)
class RunConfig:
    policy: PolicyConfig
    taf: Optional[TafConfig] = None
    seed: int = 0
    max_target_factor: float = 1.5
    use_document_context: bool = False
    lm_context_cap: int = 512
    eval_units: str = WORD

    def __post_init__(self) -> None:
        if self.max_target_factor <= 0:
            raise ConfigError("max_target_factor must be positive")
        if self.lm_context_cap < 1:
            raise ConfigError("lm_context_cap must be at least 1")


@dataclass(frozen=True)
class DocumentCorpus:
    """Parallel sentences, optionally grouped into documents."""

    sources: Tuple[Tuple[Token, ...], ...]
    references: Tuple[Tuple[str, ...], ...]
    doc_ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if len(self.sources) != len(self.references):
            raise ValueError(
                f"{len(self.sources)} source sentences but "
                f"{len(self.references)} references"
            )
        if self.doc_ids is not None and len(self.doc_ids) != len(self.sources):
            raise ValueError("document ids do not cover the corpus")
        for i, src in enumerate(self.sources):
            if not src:
                raise ValueError(f"source sentence {i} is empty")

    def __len__(self) -> int:
        return len(self.sources)

    def preceding_in_document(self, index: int) -> Tuple[int, ...]:
        if self.doc_ids is None:
            return ()
        doc = self.doc_ids[index]
        return tuple(
            j for j in range(index) if self.doc_ids[j] == doc
        )


def _read_lines(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def load_docids(path: str | Path, expected_lines: int) -> Tuple[str, ...]:
    """Parse the sentence-to-document map: line TAB doc TAB index rows."""
    ids: list[str] = []
    for row_no, raw in enumerate(_read_lines(path), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ValueError(f"docids row {row_no}: expected 3 columns")
        line_number = int(parts[0])
        if line_number != len(ids) + 1:
            raise ValueError(
                f"docids row {row_no}: line numbers must be 1..N in order"
            )
        int(parts[2])  # sentence index, validated as numeric only
        ids.append(parts[1])
    if len(ids) != expected_lines:
        raise ValueError(
            f"docids cover {len(ids)} lines, corpus has {expected_lines}"
        )
    return tuple(ids)


def load_corpus(
    source_path: str | Path,
    reference_path: str | Path,
    docids_path: str | Path | None = None,
) -> DocumentCorpus:
    sources = tuple(tokenize(line) for line in _read_lines(source_path))
    references = tuple(
        tuple(line.split()) for line in _read_lines(reference_path)
    )
    doc_ids = None
    if docids_path is not None:
        doc_ids = load_docids(docids_path, len(sources))
    return DocumentCorpus(sources, references, doc_ids)


def load_lexicon(path: str | Path) -> Dict[str, str]:
    lexicon: Dict[str, str] = {}
    for row_no, raw in enumerate(_read_lines(path), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ValueError(f"lexicon row {row_no}: expected 2 columns")
        lexicon[parts[0]] = parts[1]
    return lexicon


def step_seed(global_seed: int, sentence_id: int, step_index: int) -> int:
    """Stable per-step seed; independent of threading and sentence order."""
    digest = hashlib.blake2b(
        f"{global_seed}:{sentence_id}:{step_index}".encode("utf-8"),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "big")


def build_lm_context(
    previous_sentences: Sequence[Sequence[Token]],
    current_prefix: Sequence[Token],
    cap: int,
) -> Tuple[Token, ...]:
    """Concatenate history and prefix, keeping only the newest ``cap`` tokens."""
    merged: list[Token] = []
    for sent in previous_sentences:
        merged.extend(sent)
    merged.extend(current_prefix)
    if len(merged) > cap:
        merged = merged[len(merged) - cap :]
    return tuple(merged)


def simulate_sentence(
    engine: Engine,
    models: ModelsBundle,
    source: Sequence[Token],
    sentence_id: int | str,
    run_cfg: RunConfig,
    history: Sequence[Sequence[Token]] = (),
) -> Trajectory:
    """Run one sentence to completion and return its trajectory."""
    if not source:
        raise ValueError("cannot simulate an empty source sentence")
    if engine.uses_lm and models.lm is None:
        raise ConfigError("this policy needs a language model")
    engine.start_sentence()
    state = StreamState()
    actions: list[Action] = []
    step_log = []
    cap_total = max(1, int(run_cfg.max_target_factor * len(source)))
    cursor = 0
    # Enough steps to read everything, write to the cap, and stall briefly.
    step_limit = 4 * (len(source) + cap_total) + 16
    step_index = 0
    while True:
        if step_index > step_limit:
            raise InconsistencyError(
                f"sentence {sentence_id}: no progress after {step_limit} steps"
            )
        budget = cap_total - len(state.hypothesis)
        if budget <= 0:
            action = Action(WRITE, (EOS,), confidence=1.0)
            actions.append(action)
            break
        lm_context = None
        if engine.uses_lm and not state.source_exhausted:
            if run_cfg.use_document_context and history:
                lm_context = build_lm_context(
                    history, state.source_read, run_cfg.lm_context_cap
                )
        ctx = StepContext(
            models=models,
            step_index=step_index,
            step_seed=step_seed(run_cfg.seed, sentence_id, step_index),
            hyp_budget=budget,
            lm_context=lm_context,
        )
        action, record = engine.step(state, ctx)
        if action.kind == WRITE:
            state = apply_action(state, action)
        else:
            supplied = source[cursor] if cursor < len(source) else EOS
            cursor += 1
            state = apply_action(state, action, next_source=supplied)
        actions.append(action)
        step_log.append(record)
        step_index += 1
        if action.kind == WRITE and action.tokens[-1].is_eos:
            break
    return Trajectory(
        sentence_id=str(sentence_id),
        actions=tuple(actions),
        final_hypothesis=state.hypothesis,
        delays=state.delays,
        step_log=tuple(step_log),
    )


def run_corpus(
    run_cfg: RunConfig,
    corpus: DocumentCorpus,
    models: ModelsBundle,
    jobs: int = 1,
) -> Tuple[Trajectory, ...]:
    """Simulate every sentence; results are ordered and seed-deterministic."""

    def one(index: int) -> Trajectory:
        engine = build_engine(run_cfg.policy, run_cfg.taf)
        history: Tuple[Tuple[Token, ...], ...] = ()
        if run_cfg.use_document_context:
            history = tuple(
                corpus.sources[j] for j in corpus.preceding_in_document(index)
            )
        return simulate_sentence(
            engine, models, corpus.sources[index], index, run_cfg, history
        )

    indices = range(len(corpus))
    if jobs <= 1:
        return tuple(one(i) for i in indices)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return tuple(pool.map(one, indices))


@dataclass(frozen=True)
class EvalResult:
    bleu: float
    al: float
    laal: float
    per_sentence_al: Tuple[float, ...] = field(default=(), repr=False)
    per_sentence_laal: Tuple[float, ...] = field(default=(), repr=False)


def evaluate_run(
    trajectories: Sequence[Trajectory],
    corpus: DocumentCorpus,
    units: str = WORD,
) -> EvalResult:
    if len(trajectories) != len(corpus):
        raise ValueError("trajectory count does not match the corpus")
    hyps: list[Tuple[str, ...]] = []
    refs: list[Tuple[str, ...]] = []
    als: list[float] = []
    laals: list[float] = []
    for traj, source, reference in zip(
        trajectories, corpus.sources, corpus.references
    ):
        surfaces = tuple(t.surface for t in traj.final_hypothesis)
        units_h, delays_h = convert_delays(surfaces, traj.delays, units)
        units_r, _ = convert_delays(
            reference, tuple(0.0 for _ in reference), units
        )
        hyps.append(units_h)
        refs.append(units_r)
        source_len = len(source)
        als.append(average_lagging(delays_h, source_len))
        laals.append(laal(delays_h, source_len, len(units_r)))
    score = bleu(hyps, refs)
    mean_al = sum(als) / len(als)
    mean_laal = sum(laals) / len(laals)
    return EvalResult(score, mean_al, mean_laal, tuple(als), tuple(laals))


def build_models(cfg: Mapping[str, object]) -> ModelsBundle:
    """Construct the model bundle from a declarative mapping.

    Local keys: ``lm_corpus`` (+ ``lm_order``, ``lm_alpha``), ``mt_kind``
    one of copy | lexicon | lookahead (+ ``lexicon``, ``delta``,
    ``epsilon``).  Remote keys: ``lm_url`` and ``mt_url`` point at a
    serving endpoint; they override the local constructors.
    """
    lm = None
    lm_url = cfg.get("lm_url")
    mt_url = cfg.get("mt_url")
    if lm_url or mt_url:
        from .remote import RemoteLm, RemoteMt

        if not (lm_url and mt_url):
            raise ConfigError("remote mode needs both lm_url and mt_url")
        return ModelsBundle(mt=RemoteMt(str(mt_url)), lm=RemoteLm(str(lm_url)))
    corpus_path = cfg.get("lm_corpus")
    if corpus_path:
        sentences = [
            tokenize(line)
            for line in _read_lines(str(corpus_path))
            if line.strip()
        ]
        lm = fit_ngram_lm(
            sentences,
            order=int(cfg.get("lm_order", 3)),
            alpha=float(cfg.get("lm_alpha", 0.1)),
        )
    kind = str(cfg.get("mt_kind", "copy"))
    epsilon = float(cfg.get("epsilon", 0.01))
    if kind == "copy":
        mt = CopyMt(epsilon=epsilon)
    elif kind in ("lexicon", "lookahead"):
        lexicon_path = cfg.get("lexicon")
        if not lexicon_path:
            raise ConfigError(f"mt_kind {kind!r} needs a lexicon file")
        lexicon = load_lexicon(str(lexicon_path))
        if kind == "lexicon":
            mt = LexiconMt(lexicon, epsilon=epsilon)
        else:
            mt = LookaheadMt(
                lexicon, delta=int(cfg.get("delta", 2)), epsilon=epsilon
            )
    else:
        raise ConfigError(f"unknown mt_kind {kind!r}")
    return ModelsBundle(mt=mt, lm=lm)
