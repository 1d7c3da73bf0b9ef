"""The served models must be invisible to the engine.

Runs the full simulation once with in-process models and once with the
remote clients pointed at this server (in-process ASGI, no sockets), and
requires identical trajectories, step logs and confidences included.
"""
from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from simulstream.engines import ModelsBundle
from simulstream.harness import RunConfig, build_models, load_corpus, run_corpus
from simulstream.models import ModelError
from simulstream.policies import RALCP, WAIT_K_STRIDE_N, PolicyConfig
from simulstream.remote import RemoteLm, RemoteMt
from simulstream.synth import write_corpus_files
from simulstream.taf import TafConfig
from simulstream_bridge import create_app


@pytest.fixture(scope="module")
def setup(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    paths = write_corpus_files(
        out, vocab_size=10, sentence_count=8, min_len=5, max_len=8,
        delta=1, seed=5,
    )
    corpus = load_corpus(paths["source"], paths["reference"])
    local = build_models(
        {
            "mt_kind": "lookahead",
            "lexicon": str(paths["lexicon"]),
            "delta": 1,
            "lm_corpus": str(paths["lm_corpus"]),
            "lm_order": 3,
            "lm_alpha": 0.1,
        }
    )
    client = TestClient(create_app(lm=local.lm, mt=local.mt))
    remote = ModelsBundle(
        mt=RemoteMt("http://testserver", client=client),
        lm=RemoteLm("http://testserver", client=client),
    )
    return corpus, local, remote


def test_remote_models_report_healthy(setup):
    _, _, remote = setup
    assert remote.mt.healthy()
    assert remote.lm.healthy()


def test_composed_run_reproduces_in_process_trajectories(setup):
    corpus, local, remote = setup
    cfg = RunConfig(
        policy=PolicyConfig(kind=RALCP, gamma=0.6, beam_width=4),
        taf=TafConfig(n=2, l=3, k=2, tau=0.6, beam_per_continuation=2),
        seed=1,
    )
    assert run_corpus(cfg, corpus, remote) == run_corpus(cfg, corpus, local)


def test_plain_policy_reproduces_in_process_trajectories(setup):
    corpus, local, remote = setup
    cfg = RunConfig(policy=PolicyConfig(kind=WAIT_K_STRIDE_N, K=2, N=1), seed=0)
    served = run_corpus(cfg, corpus, ModelsBundle(mt=remote.mt))
    direct = run_corpus(cfg, corpus, ModelsBundle(mt=local.mt))
    assert served == direct


def test_remote_sampler_rejects_temperature(setup):
    _, _, remote = setup
    with pytest.raises(ModelError):
        remote.lm.sample_continuations((), 1, 2, 1, 0, temperature=0.5)
