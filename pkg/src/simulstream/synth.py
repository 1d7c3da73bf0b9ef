"""Synthetic corpora with exactly learnable structure.

The generator builds a language from a single seeded permutation of the
vocabulary (the "cycle").  Every sentence is a suffix of that cycle, so any
token determines its successor and the final cycle token determines the end
of the sentence.  An order-3 back-off model trained on held-out suffixes is
therefore deterministic everywhere, which makes anticipation exact and lets
tests separate policy behaviour from model noise.

References are produced by a fixed lexicon applied with a lookahead shift:
target position ``p`` carries the image of source position ``p + delta``,
and the last ``delta`` positions carry end markers.  This gives the target
side a real dependency on not-yet-read source tokens, the situation
anticipation is meant to exploit.
"""
from __future__ import annotations

import random
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple


def token_cycle(vocab_size: int, seed: int) -> Tuple[str, ...]:
    if vocab_size < 2:
        raise ValueError("need at least two vocabulary tokens")
    surfaces = [f"w{i:02d}" for i in range(vocab_size)]
    rng = random.Random(seed)
    rng.shuffle(surfaces)
    return tuple(surfaces)


def suffix_sentences(
    cycle: Sequence[str],
    count: int,
    min_len: int,
    max_len: int,
    seed: int,
) -> Tuple[Tuple[str, ...], ...]:
    """Sample sentences; every admissible length appears at least once.

    Guaranteeing one sentence of maximal length means a model trained on the
    output has seen every transition any shorter suffix can contain.
    """
    size = len(cycle)
    if not 2 <= min_len <= max_len <= size:
        raise ValueError(
            f"need 2 <= min_len <= max_len <= {size}, "
            f"got [{min_len}, {max_len}]"
        )
    lengths = list(range(max_len, min_len - 1, -1))
    if count < len(lengths):
        raise ValueError(
            f"count {count} cannot cover all {len(lengths)} lengths"
        )
    rng = random.Random(seed)
    chosen = lengths + [
        rng.randint(min_len, max_len) for _ in range(count - len(lengths))
    ]
    rng.shuffle(chosen)
    return tuple(tuple(cycle[size - n :]) for n in chosen)


def default_lexicon(cycle: Sequence[str]) -> Dict[str, str]:
    # "wNN" -> "tNN"; images stay disjoint from sources and end markers.
    return {surface: "t" + surface[1:] for surface in cycle}


def end_markers(delta: int) -> Tuple[str, ...]:
    return tuple(f"end{i}" for i in range(1, delta + 1))


def reference_for(
    source: Sequence[str],
    lexicon: Mapping[str, str],
    delta: int,
    markers: Sequence[str] | None = None,
) -> Tuple[str, ...]:
    if markers is None:
        markers = end_markers(delta)
    if len(markers) != delta:
        raise ValueError(f"need {delta} end markers, got {len(markers)}")
    shifted = [lexicon.get(s, s) for s in source[delta:]]
    return tuple(shifted) + tuple(markers)


def write_corpus_files(
    out_dir: str | Path,
    vocab_size: int = 20,
    sentence_count: int = 200,
    min_len: int = 10,
    max_len: int = 20,
    delta: int = 2,
    seed: int = 0,
    lm_sentence_count: int | None = None,
    doc_size: int = 5,
) -> Dict[str, Path]:
    """Emit the full fixture set and return the paths by role.

    Files: ``source.txt`` and ``reference.txt`` (parallel, one sentence per
    line, whitespace tokens), ``lm_corpus.txt`` (held-out sentences from the
    same language for model fitting), ``lexicon.tsv`` (source TAB image),
    ``docids.tsv`` (1-based line number TAB document id TAB 0-based index
    of the sentence within its document).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cycle = token_cycle(vocab_size, seed)
    lexicon = default_lexicon(cycle)
    sources = suffix_sentences(cycle, sentence_count, min_len, max_len, seed + 1)
    if lm_sentence_count is None:
        lm_sentence_count = sentence_count
    held_out = suffix_sentences(cycle, lm_sentence_count, min_len, max_len, seed + 2)

    paths = {
        "source": out / "source.txt",
        "reference": out / "reference.txt",
        "lm_corpus": out / "lm_corpus.txt",
        "lexicon": out / "lexicon.tsv",
        "docids": out / "docids.tsv",
    }
    _write_lines(paths["source"], (" ".join(s) for s in sources))
    _write_lines(
        paths["reference"],
        (" ".join(reference_for(s, lexicon, delta)) for s in sources),
    )
    _write_lines(paths["lm_corpus"], (" ".join(s) for s in held_out))
    _write_lines(
        paths["lexicon"],
        (f"{src}\t{img}" for src, img in sorted(lexicon.items())),
    )
    doc_rows = []
    for i in range(len(sources)):
        doc_rows.append(f"{i + 1}\td{i // doc_size:04d}\t{i % doc_size}")
    _write_lines(paths["docids"], doc_rows)
    return paths


def _write_lines(path: Path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
