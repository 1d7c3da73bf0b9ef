"""Quality and latency metrics for incremental translation runs.

Latency follows the average-lagging family: each committed target token has
a delay (how many source tokens had been read when it was committed) and the
metric averages how far those delays run ahead of an ideal diagonal.  The
length-adaptive variant replaces the hypothesis length with
``max(hypothesis, reference)`` when building the diagonal, so over- and
under-generation are penalized symmetrically.

Quality is corpus-level BLEU-4 without smoothing, returned in ``[0, 1]``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

WORD = "word"
CHARACTER = "character"
EVAL_UNITS = (WORD, CHARACTER)

# Subword glue marker: a token ending with it joins the following token.
GLUE = "@@"


class MetricsError(ValueError):
    pass


def convert_delays(
    surfaces: Sequence[str],
    delays: Sequence[float],
    units: str,
    glue: str = GLUE,
) -> Tuple[Tuple[str, ...], Tuple[float, ...]]:
    """Re-bucket token delays into word or character units.

    ``surfaces`` are the committed target tokens (no EOS).  In word units,
    consecutive tokens glued with a trailing ``glue`` marker merge into one
    word whose delay is the delay of its last constituent piece.  In
    character units every character inherits its token's delay; inter-token
    whitespace contributes no unit.
    """
    if len(surfaces) != len(delays):
        raise MetricsError(
            f"{len(surfaces)} surfaces but {len(delays)} delays"
        )
    if units not in EVAL_UNITS:
        raise MetricsError(f"unknown units {units!r}")
    if units == WORD:
        words: list[str] = []
        word_delays: list[float] = []
        pending = ""
        for surface, delay in zip(surfaces, delays):
            if surface.endswith(glue) and len(surface) > len(glue):
                pending += surface[: -len(glue)]
                continue
            words.append(pending + surface)
            word_delays.append(delay)
            pending = ""
        if pending:
            # Dangling glue piece at the end of the hypothesis; keep it as
            # its own word rather than dropping committed output.
            words.append(pending)
            word_delays.append(delays[-1])
        return tuple(words), tuple(word_delays)
    chars: list[str] = []
    char_delays: list[float] = []
    for surface, delay in zip(surfaces, delays):
        for ch in surface:
            if ch.isspace():
                continue
            chars.append(ch)
            char_delays.append(delay)
    return tuple(chars), tuple(char_delays)


def _lagging(
    delays: Sequence[float], source_len: int, rate: float
) -> float:
    if not delays:
        return 0.0
    cutoff = len(delays)
    for i, d in enumerate(delays):
        if d >= source_len:
            cutoff = i + 1
            break
    total = 0.0
    for i in range(cutoff):
        total += delays[i] - i / rate
    return total / cutoff


def average_lagging(
    delays: Sequence[float], source_len: int, target_len: Optional[int] = None
) -> float:
    """Average lagging with the rate taken from the hypothesis length."""
    if source_len < 1:
        raise MetricsError("source must contain at least one unit")
    if target_len is None:
        target_len = len(delays)
    if not delays or target_len < 1:
        return 0.0
    return _lagging(delays, source_len, target_len / source_len)


def laal(
    delays: Sequence[float],
    source_len: int,
    reference_len: int,
    target_len: Optional[int] = None,
) -> float:
    """Length-adaptive average lagging.

    The diagonal rate uses ``max(target_len, reference_len)`` so that a
    hypothesis shorter than the reference cannot buy latency for free.
    """
    if source_len < 1:
        raise MetricsError("source must contain at least one unit")
    if target_len is None:
        target_len = len(delays)
    if not delays:
        return 0.0
    longer = max(target_len, reference_len)
    if longer < 1:
        return 0.0
    return _lagging(delays, source_len, longer / source_len)


def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def bleu(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
) -> float:
    """Corpus BLEU, geometric mean of orders 1..max_order, no smoothing.

    Any order with zero matches sends the score to 0.  Returned on [0, 1].
    """
    if len(hypotheses) != len(references):
        raise MetricsError(
            f"{len(hypotheses)} hypotheses but {len(references)} references"
        )
    if not hypotheses:
        raise MetricsError("nothing to score")
    matches = [0] * max_order
    candidates = [0] * max_order
    hyp_total = 0
    ref_total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_total += len(hyp)
        ref_total += len(ref)
        for order in range(1, max_order + 1):
            hyp_counts = _ngrams(hyp, order)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, order)
            candidates[order - 1] += sum(hyp_counts.values())
            matches[order - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )
    if hyp_total == 0:
        return 0.0
    log_sum = 0.0
    for order in range(max_order):
        if matches[order] == 0 or candidates[order] == 0:
            return 0.0
        log_sum += math.log(matches[order] / candidates[order])
    brevity = min(0.0, 1.0 - ref_total / hyp_total)
    return math.exp(brevity + log_sum / max_order)


@dataclass(frozen=True)
class QualityLatencyPoint:
    """One evaluated configuration, ready for CSV serialization."""

    config_id: str
    policy: str
    bleu: float
    al: float
    laal: float
    tau: Optional[float] = None
    K: Optional[int] = None
    N: Optional[int] = None
    gamma: Optional[float] = None
    n: Optional[int] = None
    l: Optional[int] = None
    k: Optional[int] = None


CSV_HEADER = "config_id,policy,tau,K,N,gamma,n,l,k,bleu,al,laal"


def _fmt(value, spec: str) -> str:
    if value is None:
        return ""
    return format(value, spec)


def csv_row(point: QualityLatencyPoint) -> str:
    cells = (
        point.config_id,
        point.policy,
        _fmt(point.tau, ".2f"),
        _fmt(point.K, "d"),
        _fmt(point.N, "d"),
        _fmt(point.gamma, ".2f"),
        _fmt(point.n, "d"),
        _fmt(point.l, "d"),
        _fmt(point.k, "d"),
        format(point.bleu, ".6f"),
        format(point.al, ".6f"),
        format(point.laal, ".6f"),
    )
    for cell in cells:
        if "," in cell or "\n" in cell:
            raise MetricsError(f"cell {cell!r} would corrupt the CSV")
    return ",".join(cells)


def write_metrics_csv(path, points: Iterable[QualityLatencyPoint]) -> None:
    lines = [CSV_HEADER]
    lines.extend(csv_row(p) for p in points)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def pareto_frontier(
    points: Sequence[QualityLatencyPoint],
) -> Tuple[QualityLatencyPoint, ...]:
    """Points not dominated on (higher bleu, lower laal)."""
    frontier = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            if q.bleu >= p.bleu and q.laal <= p.laal and (
                q.bleu > p.bleu or q.laal < p.laal
            ):
                dominated = True
                break
        if not dominated:
            frontier.append(p)
    return tuple(frontier)
