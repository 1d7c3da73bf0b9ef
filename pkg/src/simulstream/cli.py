"""Command line front end.

Subcommands:

* ``simulate``   run one configuration over a corpus
* ``sweep``      run a parameter grid and emit a metrics table + frontier
* ``gen-synthetic``  write a synthetic fixture corpus
* ``score``      recompute metrics from stored trajectories

Configuration comes from a TOML file with ``[models]``, ``[policy]``,
``[taf]``, ``[run]`` and (for sweeps) ``[sweep]`` tables; command line
flags override file values.  The seed resolves as: ``--seed`` flag, then
``[run] seed``, then the ``SIMULSTREAM_SEED`` environment variable, then 0.

Exit codes: 0 success, 2 configuration error, 3 input/output error.
"""
from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Mapping, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .core import write_trajectories, read_trajectories
from .harness import (
    DocumentCorpus,
    RunConfig,
    build_models,
    evaluate_run,
    load_corpus,
    run_corpus,
)
from .metrics import (
    EVAL_UNITS,
    QualityLatencyPoint,
    WORD,
    pareto_frontier,
    write_metrics_csv,
)
from .models import ModelError
from .policies import ConfigError, POLICY_KINDS, PolicyConfig, RALCP
from .synth import write_corpus_files
from .taf import TafConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

SEED_ENV = "SIMULSTREAM_SEED"

_POLICY_KEYS = ("kind", "K", "N", "gamma", "segment_size", "beam_width")
_TAF_KEYS = ("n", "l", "k", "tau", "beam_per_continuation", "temperature")
_SWEEP_AXES = _POLICY_KEYS[1:] + _TAF_KEYS + ("seed",)


def _load_toml(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def _build_policy(section: Mapping[str, Any]) -> PolicyConfig:
    unknown = set(section) - set(_POLICY_KEYS)
    if unknown:
        raise ConfigError(f"unknown policy keys: {sorted(unknown)}")
    kind = section.get("kind")
    if kind is None:
        raise ConfigError("policy kind is required")
    if kind not in POLICY_KINDS:
        raise ConfigError(
            f"unknown policy kind {kind!r}; expected one of {sorted(POLICY_KINDS)}"
        )
    kwargs: Dict[str, Any] = {"kind": kind}
    if section.get("K") is not None:
        kwargs["K"] = int(section["K"])
    if section.get("N") is not None:
        kwargs["N"] = int(section["N"])
    if section.get("gamma") is not None:
        kwargs["gamma"] = float(section["gamma"])
    if section.get("segment_size") is not None:
        kwargs["segment_size"] = int(section["segment_size"])
    if section.get("beam_width") is not None:
        kwargs["beam_width"] = int(section["beam_width"])
    return PolicyConfig(**kwargs)


def _build_taf(section: Mapping[str, Any], seed: int) -> Optional[TafConfig]:
    if not section:
        return None
    enabled = section.get("enabled", True)
    if not enabled:
        return None
    unknown = set(section) - set(_TAF_KEYS) - {"enabled"}
    if unknown:
        raise ConfigError(f"unknown anticipation keys: {sorted(unknown)}")
    kwargs: Dict[str, Any] = {"seed": seed}
    for key in ("n", "l", "k", "beam_per_continuation"):
        if section.get(key) is not None:
            kwargs[key] = int(section[key])
    if section.get("tau") is not None:
        kwargs["tau"] = float(section["tau"])
    if section.get("temperature") is not None:
        kwargs["temperature"] = float(section["temperature"])
    return TafConfig(**kwargs)


def _resolve_seed(flag: Optional[int], run_section: Mapping[str, Any]) -> int:
    if flag is not None:
        return flag
    if run_section.get("seed") is not None:
        return int(run_section["seed"])
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return 0


def _auto_beam_width(
    policy_section: Dict[str, Any], taf: Optional[TafConfig]
) -> Dict[str, Any]:
    # Composed relaxed-agreement votes over the whole candidate pool with
    # threshold tau, so the base beam width must equal
    # n * beam_per_continuation and gamma is unused; fill both in when the
    # configuration leaves them implicit.
    if taf is not None and policy_section.get("kind") == RALCP:
        policy_section = dict(policy_section)
        if policy_section.get("beam_width") is None:
            policy_section["beam_width"] = taf.n * taf.beam_per_continuation
        if policy_section.get("gamma") is None:
            policy_section["gamma"] = taf.tau
    return policy_section


def _policy_label(policy: PolicyConfig, taf: Optional[TafConfig]) -> str:
    return policy.kind + ("+taf" if taf is not None else "")


def _point_from_result(
    config_id: str,
    policy: PolicyConfig,
    taf: Optional[TafConfig],
    result,
) -> QualityLatencyPoint:
    return QualityLatencyPoint(
        config_id=config_id,
        policy=_policy_label(policy, taf),
        bleu=result.bleu,
        al=result.al,
        laal=result.laal,
        tau=taf.tau if taf else None,
        K=policy.K,
        N=policy.N,
        gamma=policy.gamma,
        n=taf.n if taf else None,
        l=taf.l if taf else None,
        k=taf.k if taf else None,
    )


def _corpus_from_args(args, run_section: Mapping[str, Any]) -> DocumentCorpus:
    source = args.source or run_section.get("source")
    reference = args.reference or run_section.get("reference")
    docids = args.docids or run_section.get("docids")
    if not source or not reference:
        raise ConfigError("source and reference corpora are required")
    return load_corpus(source, reference, docids)


def _run_config_from(
    args,
    run_section: Mapping[str, Any],
    policy: PolicyConfig,
    taf: Optional[TafConfig],
    seed: int,
) -> RunConfig:
    units = args.units or run_section.get("units", WORD)
    if units not in EVAL_UNITS:
        raise ConfigError(f"unknown units {units!r}")
    doc_context = run_section.get("doc_context", False)
    if args.doc_context:
        doc_context = True
    return RunConfig(
        policy=policy,
        taf=taf,
        seed=seed,
        max_target_factor=float(
            args.max_target_factor
            if args.max_target_factor is not None
            else run_section.get("max_target_factor", 1.5)
        ),
        use_document_context=bool(doc_context),
        lm_context_cap=int(run_section.get("lm_context_cap", 512)),
        eval_units=units,
    )


def _policy_overrides(args) -> Dict[str, Any]:
    return {
        "kind": args.policy,
        "K": args.K,
        "N": args.N,
        "gamma": args.gamma,
        "segment_size": args.segment_size,
        "beam_width": args.beam_width,
    }


def _taf_overrides(args) -> Dict[str, Any]:
    return {
        "n": args.n,
        "l": args.l,
        "k": args.k,
        "tau": args.tau,
        "beam_per_continuation": args.beam_per_continuation,
    }


def _models_overrides(args) -> Dict[str, Any]:
    return {
        "lm_corpus": args.lm_corpus,
        "lm_order": args.lm_order,
        "lm_alpha": args.lm_alpha,
        "mt_kind": args.mt_kind,
        "lexicon": args.lexicon,
        "delta": args.delta,
        "epsilon": args.epsilon,
        "lm_url": args.lm_url,
        "mt_url": args.mt_url,
    }


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--source", help="source corpus, one sentence per line")
    p.add_argument("--reference", help="reference corpus, parallel to source")
    p.add_argument("--docids", help="sentence-to-document map (TSV)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--units", choices=EVAL_UNITS, default=None)
    p.add_argument("--doc-context", action="store_true", default=False)
    p.add_argument("--max-target-factor", type=float, default=None)
    # model overrides
    p.add_argument("--lm-corpus")
    p.add_argument("--lm-order", type=int, default=None)
    p.add_argument("--lm-alpha", type=float, default=None)
    p.add_argument("--mt-kind", choices=("copy", "lexicon", "lookahead"))
    p.add_argument("--lexicon")
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--lm-url")
    p.add_argument("--mt-url")


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=tuple(sorted(POLICY_KINDS)))
    p.add_argument("-K", "--K", type=int, default=None)
    p.add_argument("-N", "--N", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--segment-size", type=int, default=None)
    p.add_argument("--beam-width", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("-n", "--n", type=int, default=None)
    p.add_argument("-l", "--l", type=int, default=None)
    p.add_argument("-k", "--k", type=int, default=None)
    p.add_argument("--beam-per-continuation", type=int, default=None)
    p.add_argument(
        "--no-taf",
        action="store_true",
        help="run the base policy even if the config enables anticipation",
    )


def _cmd_simulate(args) -> int:
    cfg = _load_toml(args.config)
    run_section = cfg.get("run", {})
    seed = _resolve_seed(args.seed, run_section)
    taf_section = _merge(cfg.get("taf", {}), _taf_overrides(args))
    taf = None if args.no_taf else _build_taf(taf_section, seed)
    policy_section = _auto_beam_width(
        _merge(cfg.get("policy", {}), _policy_overrides(args)), taf
    )
    policy = _build_policy(policy_section)
    run_cfg = _run_config_from(args, run_section, policy, taf, seed)
    corpus = _corpus_from_args(args, run_section)
    models = build_models(_merge(cfg.get("models", {}), _models_overrides(args)))
    trajectories = run_corpus(run_cfg, corpus, models, jobs=args.jobs)
    output = args.output or run_section.get("output")
    if output:
        write_trajectories(trajectories, output)
    result = evaluate_run(trajectories, corpus, run_cfg.eval_units)
    config_id = args.config_id or run_section.get("config_id", "run")
    point = _point_from_result(config_id, policy, taf, result)
    metrics_out = args.metrics_out or run_section.get("metrics_out")
    if metrics_out:
        write_metrics_csv(metrics_out, [point])
    print(
        f"{config_id}: sentences={len(corpus)} bleu={result.bleu:.4f} "
        f"al={result.al:.4f} laal={result.laal:.4f}"
    )
    return EXIT_OK


def _axis_value_id(key: str, value: Any) -> str:
    if isinstance(value, float):
        return f"{key}={value:g}"
    return f"{key}={value}"


def _cmd_sweep(args) -> int:
    cfg = _load_toml(args.config)
    sweep_section = cfg.get("sweep")
    if not sweep_section:
        raise ConfigError("sweep needs a [sweep] table listing parameter values")
    unknown = set(sweep_section) - set(_SWEEP_AXES)
    if unknown:
        raise ConfigError(f"unknown sweep axes: {sorted(unknown)}")
    axes = []
    for key in sorted(sweep_section):
        values = sweep_section[key]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {key!r} must be a non-empty list")
        axes.append((key, values))
    run_section = cfg.get("run", {})
    base_seed = _resolve_seed(args.seed, run_section)
    base_policy_section = _merge(cfg.get("policy", {}), _policy_overrides(args))
    base_taf_section = _merge(cfg.get("taf", {}), _taf_overrides(args))
    taf_axes = {key for key, _ in axes if key in _TAF_KEYS}
    if taf_axes and not base_taf_section:
        raise ConfigError(
            f"sweep sets {sorted(taf_axes)} but the [taf] table is missing"
        )
    corpus = _corpus_from_args(args, run_section)
    models = build_models(_merge(cfg.get("models", {}), _models_overrides(args)))

    combos = list(itertools.product(*(values for _, values in axes)))
    keys = [key for key, _ in axes]

    def run_one(combo) -> QualityLatencyPoint:
        assignment = dict(zip(keys, combo))
        seed = int(assignment.pop("seed", base_seed))
        policy_section = dict(base_policy_section)
        taf_section = dict(base_taf_section)
        for key, value in assignment.items():
            if key in _TAF_KEYS:
                taf_section[key] = value
            else:
                policy_section[key] = value
        taf = None if args.no_taf else _build_taf(taf_section, seed)
        policy = _build_policy(_auto_beam_width(policy_section, taf))
        run_cfg = _run_config_from(args, run_section, policy, taf, seed)
        trajectories = run_corpus(run_cfg, corpus, models, jobs=1)
        result = evaluate_run(trajectories, corpus, run_cfg.eval_units)
        parts = [_axis_value_id(key, value) for key, value in zip(keys, combo)]
        config_id = _policy_label(policy, taf) + "." + ".".join(parts)
        return _point_from_result(config_id, policy, taf, result)

    if args.jobs <= 1:
        points = [run_one(c) for c in combos]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            points = list(pool.map(run_one, combos))
    points.sort(key=lambda p: p.config_id)
    metrics_out = args.metrics_out or run_section.get("metrics_out", "sweep.csv")
    write_metrics_csv(metrics_out, points)
    pareto_out = args.pareto_out or str(metrics_out) + ".pareto.csv"
    frontier = sorted(pareto_frontier(points), key=lambda p: p.config_id)
    write_metrics_csv(pareto_out, frontier)
    print(
        f"swept {len(points)} configurations -> {metrics_out} "
        f"({len(frontier)} on the frontier -> {pareto_out})"
    )
    return EXIT_OK


def _cmd_gen_synthetic(args) -> int:
    seed = args.seed if args.seed is not None else _resolve_seed(None, {})
    paths = write_corpus_files(
        args.out_dir,
        vocab_size=args.vocab_size,
        sentence_count=args.sentences,
        min_len=args.min_len,
        max_len=args.max_len,
        delta=args.delta,
        seed=seed,
        lm_sentence_count=args.lm_sentences,
        doc_size=args.doc_size,
    )
    for role in sorted(paths):
        print(f"{role}: {paths[role]}")
    return EXIT_OK


def _cmd_score(args) -> int:
    trajectories = tuple(read_trajectories(args.trajectories))
    corpus = load_corpus(args.source, args.reference, args.docids)
    if len(trajectories) != len(corpus):
        raise ValueError(
            f"{len(trajectories)} trajectories for {len(corpus)} sentences"
        )
    units = args.units or WORD
    result = evaluate_run(trajectories, corpus, units)
    config_id = args.config_id or "scored"
    point = QualityLatencyPoint(
        config_id=config_id,
        policy=args.policy_label,
        bleu=result.bleu,
        al=result.al,
        laal=result.laal,
    )
    if args.metrics_out:
        write_metrics_csv(args.metrics_out, [point])
    print(
        f"{config_id}: sentences={len(corpus)} bleu={result.bleu:.4f} "
        f"al={result.al:.4f} laal={result.laal:.4f}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulstream",
        description="simultaneous translation policies and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configuration")
    _add_shared_flags(p_sim)
    _add_policy_flags(p_sim)
    p_sim.add_argument("-o", "--output", help="trajectory JSONL path")
    p_sim.add_argument("--metrics-out", help="metrics CSV path")
    p_sim.add_argument("--config-id", default=None)
    p_sim.set_defaults(handler=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    _add_shared_flags(p_sweep)
    _add_policy_flags(p_sweep)
    p_sweep.add_argument("--metrics-out", default=None)
    p_sweep.add_argument("--pareto-out", default=None)
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_gen = sub.add_parser("gen-synthetic", help="write a synthetic corpus")
    p_gen.add_argument("--out-dir", required=True)
    p_gen.add_argument("--vocab-size", type=int, default=20)
    p_gen.add_argument("--sentences", type=int, default=200)
    p_gen.add_argument("--min-len", type=int, default=10)
    p_gen.add_argument("--max-len", type=int, default=20)
    p_gen.add_argument("--delta", type=int, default=2)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--lm-sentences", type=int, default=None)
    p_gen.add_argument("--doc-size", type=int, default=5)
    p_gen.set_defaults(handler=_cmd_gen_synthetic)

    p_score = sub.add_parser("score", help="score stored trajectories")
    p_score.add_argument("--trajectories", required=True)
    p_score.add_argument("--source", required=True)
    p_score.add_argument("--reference", required=True)
    p_score.add_argument("--docids", default=None)
    p_score.add_argument("--units", choices=EVAL_UNITS, default=None)
    p_score.add_argument("--config-id", default=None)
    p_score.add_argument("--policy-label", default="scored")
    p_score.add_argument("--metrics-out", default=None)
    p_score.set_defaults(handler=_cmd_score)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except tomllib.TOMLDecodeError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ModelError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
