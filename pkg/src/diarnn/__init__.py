"""Recurrent generative segmentation and clustering of embedding sequences.

The model threads one shared recurrent network per speaker through an
utterance, emits embeddings from a running mean of the active thread's
outputs, and couples segment changes to a distance-independent partition
prior.  Training is gradient ascent on the full log joint; decoding is an
online beam search over speaker assignments.
"""

from .decoder import (
    DecodeConfig,
    DecodeResult,
    decode_beam,
    decode_greedy,
    exhaustive_decode,
)
from .errors import FormatError, TrainingError
from .io import (
    Utterance,
    kfold_split,
    load_checkpoint,
    load_corpus,
    sample_utterance,
    save_checkpoint,
    save_corpus,
)
from .metrics import (
    DerResult,
    Segment,
    Timeline,
    der,
    labels_to_timeline,
    optimal_mapping,
    read_rttm,
    write_rttm,
)
from .model import ModelParams, corpus_log_joint, init_model_params, sequence_log_joint
from .net import EmissionParams, NetParams, backward_gradients, forward_log_likelihood
from .prior import PriorParams, estimate_p0, sequence_assignment_log_prob
from .sequences import (
    BlockCounts,
    ChangeIndicators,
    EmbeddingSequence,
    LabelSequence,
    block_counts,
    canonicalize,
    derive_change_indicators,
)
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "BlockCounts",
    "ChangeIndicators",
    "DecodeConfig",
    "DecodeResult",
    "DerResult",
    "EmbeddingSequence",
    "EmissionParams",
    "FormatError",
    "LabelSequence",
    "ModelParams",
    "NetParams",
    "PriorParams",
    "Segment",
    "Timeline",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "Utterance",
    "backward_gradients",
    "block_counts",
    "canonicalize",
    "corpus_log_joint",
    "decode_beam",
    "decode_greedy",
    "der",
    "derive_change_indicators",
    "estimate_p0",
    "exhaustive_decode",
    "forward_log_likelihood",
    "init_model_params",
    "kfold_split",
    "labels_to_timeline",
    "load_checkpoint",
    "load_corpus",
    "optimal_mapping",
    "read_rttm",
    "sample_utterance",
    "save_checkpoint",
    "save_corpus",
    "sequence_assignment_log_prob",
    "sequence_log_joint",
    "train",
    "write_rttm",
    "__version__",
]
