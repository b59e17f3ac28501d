"""Relative Similarity Metric.

For a pair ``(i, j)`` and a sampled reference set ``D'``::

    R(i, j) = mean_{k in D' \\ {i, j}} |S(i, k) - S(j, k)| + alpha * S(i, j)

where ``S`` is a base distance in [0, 1].  Larger values mean more
dissimilar.  The mean runs over references in ascending gallery-index order
with plain sequential summation, which keeps the result bit-reproducible.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    EmptyReferences,
    IndexOutOfRange,
    InsufficientReferences,
    InvalidPair,
    with_pair_context,
)
from .model import SamplingPolicy
from .rng import STREAM_REFERENCES, PortableRng
from .similarity import check_metric, pair_distance, pair_scores, score_matrix


@dataclass(frozen=True)
class ReferenceSet:
    indices: tuple
    seed: int
    policy: SamplingPolicy
    m_refs: int

    def __post_init__(self):
        idx = tuple(sorted(int(k) for k in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("reference indices must be distinct")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "policy", SamplingPolicy(self.policy))

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class RsmScore:
    value: float
    direct_component: float
    relative_component: float
    m_used: int


def delta(s_ik, s_kj):
    """Relative difference of two base distances to a common reference."""
    return abs(s_ik - s_kj)


def sample_references(gallery, config, exclusions=(), pair=None):
    """Draw ``config.m_refs`` distinct reference indices, none in ``exclusions``.

    With the per-pair policy the stream is keyed on the (unordered) pair, or
    on the sorted exclusions when no pair is given, so every pair gets its
    own reproducible draw.
    """
    excluded = sorted({gallery.check_index(e) for e in exclusions})
    available = len(gallery) - len(excluded)
    if available < config.m_refs:
        raise InsufficientReferences(available, config.m_refs)

    key = [config.seed, STREAM_REFERENCES]
    if config.sampling_policy is SamplingPolicy.PER_PAIR:
        key += sorted(int(v) for v in pair) if pair is not None else excluded
    rng = PortableRng(*key)

    picked = []
    for pos in rng.sample(range(available), config.m_refs):
        # map a position in the reduced population back to a gallery index
        for e in excluded:
            if pos >= e:
                pos += 1
        picked.append(pos)
    return ReferenceSet(tuple(picked), config.seed, config.sampling_policy, config.m_refs)


def rsm_score(i, j, gallery, refs, config):
    """RSM score of a single pair, computed record by record.

    References equal to ``i`` or ``j`` are dropped; ``m_used`` reports how
    many remain.
    """
    i, j = gallery.check_index(i), gallery.check_index(j)
    if i == j:
        raise InvalidPair(f"cannot score record {i} against itself")
    metric = check_metric(gallery, config.base_metric)
    used = [k for k in refs.indices if k != i and k != j]
    if not used:
        raise EmptyReferences(f"no references left for pair ({i}, {j}) after exclusion")
    for k in used:
        gallery.check_index(k)

    rec_i, rec_j = gallery.records[i], gallery.records[j]
    direct = pair_distance(rec_i, rec_j, metric)
    acc = 0.0
    for k in used:
        rec_k = gallery.records[k]
        acc += delta(pair_distance(rec_i, rec_k, metric), pair_distance(rec_j, rec_k, metric))
    relative = acc / len(used)
    return RsmScore(relative + config.alpha * direct, direct, relative, len(used))


def as_pair_arrays(pairs, gallery):
    """Validate a pair sequence and split it into left/right index arrays."""
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    n = len(gallery)
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= n).any(axis=1))
    if bad.size:
        pos = int(bad[0])
        raise with_pair_context(IndexOutOfRange(f"index outside gallery of {n} records"), pos, arr[pos])
    same = np.flatnonzero(arr[:, 0] == arr[:, 1])
    if same.size:
        pos = int(same[0])
        raise with_pair_context(InvalidPair("a record cannot be scored against itself"), pos, arr[pos])
    return np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])


class RsmEngine:
    """Batch RSM scorer.

    With the global policy the ``N x M`` table of base distances from every
    record to the shared references is built once; each pair then costs
    ``M`` table lookups plus one direct kernel call.  Per-pair sampling draws
    and scores references pair by pair.
    """

    def __init__(self, gallery, config, refs=None):
        self.gallery = gallery
        self.config = config
        self.metric = check_metric(gallery, config.base_metric)
        self.refs = None
        self.table = None
        if config.sampling_policy is SamplingPolicy.GLOBAL:
            self.refs = refs if refs is not None else sample_references(gallery, config)
            self.ref_idx = np.array(self.refs.indices, dtype=np.int64)
            self.table = score_matrix(np.arange(len(gallery)), self.ref_idx, gallery, self.metric)

    def score_arrays(self, left, right, direct=None):
        """Score pre-validated index arrays.

        ``direct`` may carry already computed base distances for the pairs.
        Returns ``(value, relative, direct, m_used)`` arrays.
        """
        left = np.ascontiguousarray(left, dtype=np.int64)
        right = np.ascontiguousarray(right, dtype=np.int64)
        if direct is None:
            direct = pair_scores(left, right, self.gallery, self.metric)
        else:
            direct = np.ascontiguousarray(direct, dtype=np.float64)
        if self.table is not None:
            value, relative, m_used = _kernels.backend.rsm_pairs(
                self.table, self.ref_idx, direct, left, right, self.config.alpha
            )
        else:
            value, relative, m_used = self._per_pair(left, right, direct)
        empty = np.flatnonzero(m_used == 0)
        if empty.size:
            pos = int(empty[0])
            raise with_pair_context(
                EmptyReferences("no references left after excluding the pair"),
                pos,
                (left[pos], right[pos]),
            )
        return value, relative, direct, m_used

    def _per_pair(self, left, right, direct):
        n = len(left)
        value = np.empty(n)
        relative = np.empty(n)
        m_used = np.empty(n, dtype=np.int64)
        alpha = self.config.alpha
        for t in range(n):
            i, j = int(left[t]), int(right[t])
            refs = sample_references(self.gallery, self.config, exclusions=(i, j), pair=(i, j))
            rows = score_matrix([i, j], refs.indices, self.gallery, self.metric)
            acc = 0.0
            for k in range(len(refs)):
                acc += abs(float(rows[0, k]) - float(rows[1, k]))
            rel = acc / len(refs)
            relative[t] = rel
            value[t] = rel + alpha * float(direct[t])
            m_used[t] = len(refs)
        return value, relative, m_used

    def references_for(self, i, j):
        """Reference set the engine uses for pair ``(i, j)``."""
        if self.refs is not None:
            return self.refs
        return sample_references(self.gallery, self.config, exclusions=(i, j), pair=(i, j))


def rsm_batch(pairs, gallery, config, engine=None):
    """RSM scores for a sequence of ``(i, j)`` pairs, in input order."""
    left, right = as_pair_arrays(pairs, gallery)
    if left.size == 0:
        return []
    engine = engine or RsmEngine(gallery, config)
    value, relative, direct, m_used = engine.score_arrays(left, right)
    return [
        RsmScore(float(v), float(d), float(r), int(m))
        for v, d, r, m in zip(value, direct, relative, m_used)
    ]
