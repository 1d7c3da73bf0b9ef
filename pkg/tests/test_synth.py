from __future__ import annotations

import pytest

from simulstream.harness import load_corpus, load_lexicon
from simulstream.synth import (
    default_lexicon,
    end_markers,
    reference_for,
    suffix_sentences,
    token_cycle,
    write_corpus_files,
)


def test_token_cycle_is_a_seeded_permutation():
    cycle = token_cycle(12, seed=4)
    assert sorted(cycle) == [f"w{i:02d}" for i in range(12)]
    assert token_cycle(12, seed=4) == cycle
    assert token_cycle(12, seed=5) != cycle
    with pytest.raises(ValueError):
        token_cycle(1, seed=0)


def test_suffix_sentences_cover_every_length():
    cycle = token_cycle(10, seed=0)
    sentences = suffix_sentences(cycle, count=30, min_len=3, max_len=8, seed=1)
    assert len(sentences) == 30
    lengths = {len(s) for s in sentences}
    assert lengths == set(range(3, 9))
    # every sentence must be a literal suffix of the cycle
    for sent in sentences:
        assert sent == cycle[len(cycle) - len(sent) :]


def test_suffix_sentences_validation():
    cycle = token_cycle(6, seed=0)
    with pytest.raises(ValueError):
        suffix_sentences(cycle, count=3, min_len=2, max_len=7, seed=0)
    with pytest.raises(ValueError):
        suffix_sentences(cycle, count=2, min_len=2, max_len=5, seed=0)


def test_reference_shift_and_markers():
    lexicon = {"a": "A", "b": "B", "c": "C"}
    ref = reference_for(("a", "b", "c"), lexicon, delta=2)
    assert ref == ("C", "end1", "end2")
    assert end_markers(0) == ()
    assert reference_for(("a", "b"), lexicon, delta=0) == ("A", "B")
    with pytest.raises(ValueError):
        reference_for(("a",), lexicon, delta=1, markers=("m1", "m2"))


def test_default_lexicon_images_are_disjoint():
    cycle = token_cycle(8, seed=3)
    lexicon = default_lexicon(cycle)
    assert set(lexicon) == set(cycle)
    assert not set(lexicon.values()) & set(cycle)


def test_write_corpus_files_round_trip(tmp_path):
    paths = write_corpus_files(
        tmp_path,
        vocab_size=10,
        sentence_count=12,
        min_len=4,
        max_len=8,
        delta=2,
        seed=7,
        doc_size=5,
    )
    corpus = load_corpus(paths["source"], paths["reference"], paths["docids"])
    assert len(corpus) == 12
    lexicon = load_lexicon(paths["lexicon"])
    markers = end_markers(2)
    for src, ref in zip(corpus.sources, corpus.references):
        surfaces = tuple(t.surface for t in src)
        assert ref == reference_for(surfaces, lexicon, 2, markers)
        assert len(ref) == len(src)
    # five sentences per document, zero-based positions inside each
    assert corpus.doc_ids[:6] == ("d0000",) * 5 + ("d0001",)
    lm_lines = paths["lm_corpus"].read_text().splitlines()
    assert len(lm_lines) == 12
    # held-out sentences come from the same cycle
    cycle = token_cycle(10, seed=7)
    for line in lm_lines:
        toks = tuple(line.split())
        assert toks == cycle[len(cycle) - len(toks) :]
