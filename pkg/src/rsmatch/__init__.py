"""Relative similarity matching for biometric verification.

Scores a pair of samples by how consistently they relate to a random set of
reference samples, on top of a base distance (cosine, normalized Euclidean
or Hamming), and evaluates verification error rates at scale.
"""

from ._kernels import BACKEND_NAME
from .errors import RsmError
from .evaluation import (
    Eer,
    Histogram,
    PairProtocol,
    ProtocolKind,
    ScoreSet,
    StreamingScores,
    TroublePair,
    TroubleReport,
    compute_eer,
    enumerate_pairs,
    histogram,
    roc_points,
    score_pairs,
    trouble_pairs,
)
from .fileio import read_embeddings, read_jsonl, write_embeddings, write_jsonl
from .model import (
    BaseMetric,
    BitCode,
    FeatureRecord,
    Gallery,
    MetricConfig,
    PayloadKind,
    SamplingPolicy,
    Session,
    build_gallery,
    partition_by_identity,
)
from .pipeline import EvalReport, Evaluation, run_evaluation
from .rsm import ReferenceSet, RsmEngine, RsmScore, rsm_batch, rsm_score, sample_references
from .similarity import cosine_distance, euclidean_distance_normalized, hamming_distance_normalized
from .synth import SynthSpec, generate_gallery, separation_stats

__version__ = "0.1.0"
