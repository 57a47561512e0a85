"""Prior over speaker labels.

Two coupled pieces: a Bernoulli model for whether the speaker changes
between consecutive segments, and a block-counting restaurant process that
picks which speaker a change switches to.  Given a change, an existing
speaker other than the current one is chosen with probability proportional
to the number of maximal runs (blocks) it already owns, and a brand new
speaker with probability proportional to the concentration alpha.  A
non-change keeps the current speaker with probability one, so the run
structure of the labels is exactly what the process prices.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

from .sequences import (
    BlockCounts,
    ChangeIndicators,
    LabelSequence,
    block_counts,
    derive_change_indicators,
)

__all__ = [
    "PriorParams",
    "AssignmentOption",
    "change_log_prob",
    "assignment_candidates",
    "sequence_assignment_log_prob",
    "grad_alpha",
    "estimate_p0",
]

NEG_INF = float("-inf")


def _log(value: float) -> float:
    return math.log(value) if value > 0.0 else NEG_INF


@dataclass(frozen=True)
class PriorParams:
    """No-change probability p0 and concentration alpha of the label prior."""

    p0: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


class AssignmentOption(NamedTuple):
    speaker: int
    change: int
    log_prior: float


def change_log_prob(z: int, p0: float) -> float:
    """Log-probability of one change indicator under the Bernoulli model."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    if z not in (0, 1):
        raise ValueError(f"change indicator must be 0 or 1, got {z}")
    if z == 0:
        return _log(p0)
    return math.log1p(-p0) if p0 < 1.0 else NEG_INF


def assignment_candidates(
    state: BlockCounts, alpha: float, p0: float
) -> list[AssignmentOption]:
    """Every admissible next speaker with its combined change + assignment
    log-prior.

    Options come back in the decoder's preference order: continuation
    first, then existing speakers by ascending id, then a new speaker.
    The exponentials of the log-priors always sum to one; a single known
    speaker needs no special casing because the switch mass then falls
    entirely on the new-speaker option.
    """
    PriorParams(p0=p0, alpha=alpha)  # validate the pair
    last = state.last_speaker
    switch = change_log_prob(1, p0)
    mass = state.total_blocks - state.count(last)
    log_denom = math.log(mass + alpha)
    options = [AssignmentOption(last, 0, change_log_prob(0, p0))]
    for speaker in range(1, state.num_speakers + 1):
        if speaker == last:
            continue
        options.append(
            AssignmentOption(
                speaker, 1, switch + math.log(state.count(speaker)) - log_denom
            )
        )
    options.append(
        AssignmentOption(
            state.num_speakers + 1, 1, switch + math.log(alpha) - log_denom
        )
    )
    return options


def _switch_masses(labels: LabelSequence) -> list[int]:
    """Blocks owned by speakers other than the one just left, at each change
    step of the sequence, in order."""
    masses: list[int] = []
    counts: list[int] = []
    total = 0
    last = 0
    for lab in labels:
        if last and lab != last:
            masses.append(total - counts[last - 1])
        if lab > len(counts):
            counts.append(1)
            total += 1
        elif lab != last:
            counts[lab - 1] += 1
            total += 1
        last = lab
    return masses


def _check_consistent(labels: LabelSequence, z: ChangeIndicators) -> None:
    if tuple(z) != derive_change_indicators(labels).z:
        raise ValueError("change indicators do not match the label sequence")


def sequence_assignment_log_prob(
    labels: LabelSequence, z: ChangeIndicators, alpha: float
) -> float:
    """Log-probability of a full canonical label sequence given its change
    indicators.

    Closed form: (K - 1) * log(alpha) plus sum_k log Gamma(N_k) over final
    block counts, minus log(switch mass + alpha) at every change step.
    Equals the product of the per-step assignment probabilities.
    """
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_consistent(labels, z)
    final = block_counts(labels)
    total = (final.num_speakers - 1) * math.log(alpha)
    total += sum(math.lgamma(n) for n in final.counts)
    total -= sum(math.log(m + alpha) for m in _switch_masses(labels))
    return total


def grad_alpha(labels: LabelSequence, z: ChangeIndicators, alpha: float) -> float:
    """Exact derivative of sequence_assignment_log_prob with respect to
    alpha: (K - 1) / alpha minus 1 / (switch mass + alpha) per change step."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_consistent(labels, z)
    speakers = labels.num_speakers
    return (speakers - 1) / alpha - sum(
        1.0 / (m + alpha) for m in _switch_masses(labels)
    )


def estimate_p0(corpus) -> float:
    """Closed-form maximizer of the change-model likelihood over a corpus of
    label sequences: the fraction of consecutive same-speaker pairs among
    all consecutive pairs."""
    same = 0
    pairs = 0
    for labels in corpus:
        labs = tuple(labels)
        pairs += len(labs) - 1
        same += sum(1 for i in range(1, len(labs)) if labs[i] == labs[i - 1])
    if pairs == 0:
        raise ValueError(
            "p0 undefined: corpus has no consecutive segment pairs"
        )
    return same / pairs
