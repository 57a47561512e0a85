"""Greedy and beam MAP decoding of speaker labels for an embedding
sequence, plus an exhaustive argmax over all canonical labelings for short
inputs, which is the ground truth the approximate decoders are checked
against.

Each step scores every admissible next label: keep the current speaker,
switch to any other known speaker, or open a new one.  A candidate's step
score is its combined change/assignment log-prior plus the log-density of
the current observation under that speaker's predicted emission mean, so a
committed hypothesis accumulates exactly the full joint log-probability of
its labeling.  Decisions at step t use observations up to t only.

Ties break deterministically: continuation first, then existing speakers
by ascending id, then a new speaker.  The first step is forced to
speaker 1 and carries only its emission term.
"""

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .model import ModelParams
from .net import (
    SpeakerThread,
    _as_matrix,
    advance_thread,
    fresh_thread,
    gaussian_log_pdf,
    thread_emission_mean,
)
from .prior import assignment_candidates
from .sequences import BlockCounts, LabelSequence, update_block_counts

__all__ = [
    "EXHAUSTIVE_MAX_LENGTH",
    "DecodeConfig",
    "CandidateScore",
    "DecoderHypothesis",
    "DecodeResult",
    "empty_hypothesis",
    "step_scores",
    "advance_hypothesis",
    "decode_greedy",
    "decode_beam",
    "exhaustive_decode",
    "enumerate_canonical_labelings",
    "replay_hypothesis",
]

EXHAUSTIVE_MAX_LENGTH = 12


@dataclass(frozen=True)
class DecodeConfig:
    """Search controls.

    beam_width 1 is greedy decoding.  max_speakers, when set, suppresses
    the new-speaker candidate once that many speakers exist.  look_ahead 0
    is a pure beam; a positive value forces the beam to commit to the best
    hypothesis's prefix that many steps behind the frontier, which bounds
    how late an online emitter may revise its output.
    """

    beam_width: int = 1
    max_speakers: int | None = None
    look_ahead: int = 0

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError(f"beam width must be at least 1, got {self.beam_width}")
        if self.max_speakers is not None and self.max_speakers < 1:
            raise ValueError(f"max speakers must be at least 1, got {self.max_speakers}")
        if self.look_ahead < 0:
            raise ValueError(f"look ahead must be nonnegative, got {self.look_ahead}")


class CandidateScore(NamedTuple):
    label: int
    change: int | None  # None at the forced first step
    log_prob: float


@dataclass(frozen=True)
class DecoderHypothesis:
    """A partial labeling plus enough state to extend it cheaply: one thread
    per speaker, block counts, and the cumulative log joint."""

    labels: tuple[int, ...]
    threads: tuple[SpeakerThread, ...]
    blocks: BlockCounts | None
    log_prob: float


@dataclass
class DecodeResult:
    labels: LabelSequence
    log_prob: float
    # Candidates scored per step, summed over the beam; None for the
    # exhaustive oracle, which does not step.
    step_candidate_counts: list[int] | None


def empty_hypothesis() -> DecoderHypothesis:
    return DecoderHypothesis((), (), None, 0.0)


def step_scores(
    hyp: DecoderHypothesis,
    x_t,
    params: ModelParams,
    config: DecodeConfig | None = None,
    *,
    _fresh: SpeakerThread | None = None,
) -> list[CandidateScore]:
    """Scores of every admissible next label given a partial hypothesis, in
    the deterministic preference order used for tie-breaking."""
    x_t = np.asarray(x_t, dtype=np.float64)
    sigma2 = params.emission.sigma2
    fresh = _fresh if _fresh is not None else fresh_thread(params.net)
    if not hyp.labels:
        return [
            CandidateScore(
                1, None, gaussian_log_pdf(x_t, thread_emission_mean(fresh), sigma2)
            )
        ]
    options = assignment_candidates(hyp.blocks, params.prior.alpha, params.prior.p0)
    if (
        config is not None
        and config.max_speakers is not None
        and hyp.blocks.num_speakers >= config.max_speakers
    ):
        options = [o for o in options if o.speaker <= hyp.blocks.num_speakers]
    scores = []
    for speaker, change, log_prior in options:
        thread = hyp.threads[speaker - 1] if speaker <= len(hyp.threads) else fresh
        emission = gaussian_log_pdf(x_t, thread_emission_mean(thread), sigma2)
        scores.append(CandidateScore(speaker, change, log_prior + emission))
    return scores


def advance_hypothesis(
    hyp: DecoderHypothesis,
    x_t,
    candidate: CandidateScore,
    params: ModelParams,
    *,
    _fresh: SpeakerThread | None = None,
) -> DecoderHypothesis:
    """Commit one scored candidate: advance that speaker's thread past the
    observation and fold the step score into the running log joint."""
    x_t = np.asarray(x_t, dtype=np.float64)
    speaker = candidate.label
    fresh = _fresh if _fresh is not None else fresh_thread(params.net)
    if speaker <= len(hyp.threads):
        thread = advance_thread(hyp.threads[speaker - 1], x_t, params.net)
        threads = hyp.threads[: speaker - 1] + (thread,) + hyp.threads[speaker:]
    else:
        threads = hyp.threads + (advance_thread(fresh, x_t, params.net),)
    if hyp.blocks is None:
        blocks = BlockCounts((1,), 1)
    else:
        blocks = update_block_counts(hyp.blocks, speaker)
    return DecoderHypothesis(
        hyp.labels + (speaker,), threads, blocks, hyp.log_prob + candidate.log_prob
    )


def decode_beam(
    X, params: ModelParams, config: DecodeConfig | None = None
) -> DecodeResult:
    """Width-B beam search over labelings.

    Hypotheses are expanded in preference order and pruned with a stable
    sort, so equal scores resolve exactly like the greedy rule and width 1
    reproduces greedy decoding.  Distinct hypotheses always carry distinct
    label prefixes (the hypothesis state is a function of the prefix), so
    expansion never produces duplicates and no dedupe pass is needed.  The
    final pick breaks equal-probability ties toward the lexicographically
    smallest label sequence, matching the exhaustive oracle's tie rule.
    """
    config = config or DecodeConfig()
    x = _as_matrix(X)
    if x.shape[1] != params.net.input_dim:
        raise ValueError(
            f"embedding dim {x.shape[1]} != net input dim {params.net.input_dim}"
        )
    fresh = fresh_thread(params.net)
    beam = [empty_hypothesis()]
    counts: list[int] = []
    for t in range(x.shape[0]):
        pool: list[tuple[float, DecoderHypothesis, CandidateScore]] = []
        for hyp in beam:
            for cand in step_scores(hyp, x[t], params, config, _fresh=fresh):
                pool.append((hyp.log_prob + cand.log_prob, hyp, cand))
        counts.append(len(pool))
        pool.sort(key=lambda entry: -entry[0])  # stable: preference order wins ties
        next_beam: list[DecoderHypothesis] = []
        for _, hyp, cand in pool:
            next_beam.append(advance_hypothesis(hyp, x[t], cand, params, _fresh=fresh))
            if len(next_beam) == config.beam_width:
                break
        beam = next_beam
        if config.look_ahead > 0 and t + 1 > config.look_ahead:
            cut = t + 1 - config.look_ahead
            prefix = beam[0].labels[:cut]
            beam = [h for h in beam if h.labels[:cut] == prefix]
    top = max(h.log_prob for h in beam)
    best = min((h for h in beam if h.log_prob == top), key=lambda h: h.labels)
    return DecodeResult(LabelSequence(best.labels), best.log_prob, counts)


def decode_greedy(
    X, params: ModelParams, config: DecodeConfig | None = None
) -> DecodeResult:
    """Online argmax decoding: commits the single best candidate at every
    step.  Only max_speakers is honored from the config."""
    base = config or DecodeConfig()
    cfg = DecodeConfig(beam_width=1, max_speakers=base.max_speakers, look_ahead=0)
    return decode_beam(X, params, cfg)


def exhaustive_decode(X, params: ModelParams) -> DecodeResult:
    """Argmax of the full joint over every canonical labeling.

    The label space is the Bell number of T, so inputs are guarded to
    T <= EXHAUSTIVE_MAX_LENGTH.  Equal-probability maxima resolve to the
    lexicographically smallest label sequence, the same tie rule beam
    search applies to its final pick.
    """
    x = _as_matrix(X)
    steps = x.shape[0]
    if steps > EXHAUSTIVE_MAX_LENGTH:
        raise ValueError(
            f"oracle guard: T={steps} exceeds the exhaustive limit "
            f"{EXHAUSTIVE_MAX_LENGTH}"
        )
    fresh = fresh_thread(params.net)
    best_labels: tuple[int, ...] | None = None
    best_lp = float("-inf")

    def visit(hyp: DecoderHypothesis, t: int) -> None:
        nonlocal best_labels, best_lp
        if t == steps:
            if hyp.log_prob > best_lp or (
                hyp.log_prob == best_lp
                and best_labels is not None
                and hyp.labels < best_labels
            ):
                best_labels, best_lp = hyp.labels, hyp.log_prob
            return
        for cand in step_scores(hyp, x[t], params, None, _fresh=fresh):
            visit(advance_hypothesis(hyp, x[t], cand, params, _fresh=fresh), t + 1)

    visit(empty_hypothesis(), 0)
    assert best_labels is not None
    return DecodeResult(LabelSequence(best_labels), best_lp, None)


def enumerate_canonical_labelings(length: int) -> Iterator[tuple[int, ...]]:
    """All order-of-appearance label sequences of the given length, in the
    decoder's preference order."""
    if length < 1:
        raise ValueError(f"length must be at least 1, got {length}")

    def extend(prefix: tuple[int, ...], known: int) -> Iterator[tuple[int, ...]]:
        if len(prefix) == length:
            yield prefix
            return
        prev = prefix[-1]
        order = [prev] + [k for k in range(1, known + 1) if k != prev] + [known + 1]
        for lab in order:
            yield from extend(prefix + (lab,), max(known, lab))

    yield from extend((1,), 1)


def replay_hypothesis(X, labels, params: ModelParams) -> DecoderHypothesis:
    """Rebuild the decoder state that corresponds to committing a fixed
    label sequence; its log_prob is the full joint of that labeling."""
    x = _as_matrix(X)
    labs = labels if isinstance(labels, LabelSequence) else LabelSequence(tuple(labels))
    if len(labs) != x.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} embeddings vs {len(labs)} labels")
    fresh = fresh_thread(params.net)
    hyp = empty_hypothesis()
    for t, speaker in enumerate(labs):
        for cand in step_scores(hyp, x[t], params, None, _fresh=fresh):
            if cand.label == speaker:
                break
        else:
            raise ValueError(f"label {speaker} is not reachable at step {t + 1}")
        hyp = advance_hypothesis(hyp, x[t], cand, params, _fresh=fresh)
    return hyp
