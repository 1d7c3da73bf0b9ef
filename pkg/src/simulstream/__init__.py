"""Incremental translation policies, models, and evaluation tools."""
from .core import (
    EOS,
    EOS_SURFACE,
    READ,
    WRITE,
    Action,
    InconsistencyError,
    MalformedActionError,
    PreconditionError,
    SimulstreamError,
    StepRecord,
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
from .engines import Engine, ModelsBundle, StepContext, build_engine
from .harness import (
    DocumentCorpus,
    EvalResult,
    RunConfig,
    build_lm_context,
    build_models,
    evaluate_run,
    load_corpus,
    load_docids,
    load_lexicon,
    run_corpus,
    simulate_sentence,
    step_seed,
)
from .metrics import (
    CHARACTER,
    CSV_HEADER,
    WORD,
    MetricsError,
    QualityLatencyPoint,
    average_lagging,
    bleu,
    convert_delays,
    csv_row,
    laal,
    pareto_frontier,
    write_metrics_csv,
)
from .models import (
    Continuation,
    CopyMt,
    LexiconMt,
    LookaheadMt,
    ModelError,
    NextTokenDistribution,
    NgramLm,
    ScoredHypothesis,
    fit_ngram_lm,
    mt_beam_search,
    sample_continuations,
    top_k_entries,
)
from .policies import (
    HOLD_N,
    LOCAL_AGREEMENT,
    POLICY_KINDS,
    RALCP,
    WAIT_K_STRIDE_N,
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
from .taf import (
    AnticipationStep,
    TafConfig,
    aggregate_majority,
    anticipate,
    compose_with_base,
    policy_score,
    taf_step,
    translate_under_continuations,
)

__version__ = "0.1.0"
