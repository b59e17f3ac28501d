"""Verification evaluation: pair enumeration, EER/ROC, histograms, trouble pairs.

Scores are dissimilarities: a pair is accepted when ``score <= threshold``.
FAR(t) is the fraction of impostor scores ``<= t`` and FRR(t) the fraction of
genuine scores ``> t``.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import (
    EmptyScores,
    MissingSessionTags,
    OutOfRangeScore,
    PairSequenceMismatch,
)
from .model import Session
from .rsm import RsmEngine, as_pair_arrays
from .similarity import pair_scores


class ProtocolKind(enum.Enum):
    CROSS_SESSION = "cross-session"
    ALL_PAIRS = "all-pairs"


@dataclass(frozen=True)
class PairProtocol:
    kind: ProtocolKind
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if not self.description:
            text = {
                ProtocolKind.CROSS_SESSION: "session-one records paired with session-two records",
                ProtocolKind.ALL_PAIRS: "all unordered pairs i < j",
            }[self.kind]
            object.__setattr__(self, "description", text)

    @classmethod
    def cross_session(cls):
        return cls(ProtocolKind.CROSS_SESSION)

    @classmethod
    def all_pairs(cls):
        return cls(ProtocolKind.ALL_PAIRS)

    def to_dict(self):
        return {"kind": self.kind.value, "description": self.description}


DEFAULT_CHUNK = 1 << 20


class PairStream:
    """Lazily enumerated genuine or impostor pairs of a gallery.

    Pairs come out in row-major index order.  The stream is cut into row
    blocks; ``block(b)`` materializes one block, so independent workers can
    take blocks without sharing state.
    """

    def __init__(self, gallery, protocol, genuine, chunk_size=DEFAULT_CHUNK):
        self.gallery = gallery
        self.protocol = protocol
        self.genuine = genuine
        labels = gallery.labels
        if protocol.kind is ProtocolKind.CROSS_SESSION:
            self._rows = np.flatnonzero(gallery.sessions == Session.ONE)
            self._cols = np.flatnonzero(gallery.sessions == Session.TWO)
            g = np.bincount(labels[self._rows], minlength=gallery.class_count)
            h = np.bincount(labels[self._cols], minlength=gallery.class_count)
            same = int(np.dot(g, h))
            total = len(self._rows) * len(self._cols)
        else:
            self._rows = self._cols = np.arange(len(gallery))
            sizes = np.bincount(labels, minlength=gallery.class_count)
            same = int((sizes * (sizes - 1) // 2).sum())
            n = len(gallery)
            total = n * (n - 1) // 2
        self.count = same if genuine else total - same
        per_block = max(1, chunk_size // max(1, len(self._cols)))
        self._bounds = list(range(0, len(self._rows), per_block)) + [len(self._rows)]

    def __len__(self):
        return self.count

    @property
    def num_blocks(self):
        return len(self._bounds) - 1

    def block(self, b):
        rows = self._rows[self._bounds[b]:self._bounds[b + 1]]
        left = np.repeat(rows, len(self._cols))
        right = np.tile(self._cols, len(rows))
        labels = self.gallery.labels
        keep = labels[left] == labels[right]
        if not self.genuine:
            keep = ~keep
        if self.protocol.kind is ProtocolKind.ALL_PAIRS:
            keep &= right > left
        return left[keep], right[keep]

    def chunks(self):
        for b in range(self.num_blocks):
            left, right = self.block(b)
            if left.size:
                yield left, right

    def to_array(self):
        parts = [np.stack(c, axis=1) for c in self.chunks()]
        if not parts:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(parts)

    def __iter__(self):
        for left, right in self.chunks():
            yield from zip(left.tolist(), right.tolist())


def enumerate_pairs(gallery, protocol, chunk_size=DEFAULT_CHUNK):
    """Genuine and impostor pair streams under ``protocol``."""
    if protocol.kind is ProtocolKind.CROSS_SESSION and (gallery.sessions == Session.UNSPECIFIED).any():
        missing = int((gallery.sessions == Session.UNSPECIFIED).sum())
        raise MissingSessionTags(f"{missing} records carry no session tag; cross-session pairing needs all")
    return (
        PairStream(gallery, protocol, True, chunk_size),
        PairStream(gallery, protocol, False, chunk_size),
    )


def make_scorer(gallery, config):
    """Return ``f(left, right, direct=None) -> scores`` for ``config``.

    ``direct`` optionally supplies precomputed base distances, which the RSM
    path reuses instead of recomputing.
    """
    if not config.use_rsm:
        def score(left, right, direct=None):
            if direct is not None:
                return direct
            return pair_scores(left, right, gallery, config.base_metric)
        return score

    engine = RsmEngine(gallery, config)

    def score(left, right, direct=None):
        return engine.score_arrays(left, right, direct=direct)[0]

    score.engine = engine
    return score


def score_pairs(pairs, gallery, config, scorer=None):
    """Scores for ``pairs`` (a PairStream or a sequence of ``(i, j)``), in order."""
    scorer = scorer or make_scorer(gallery, config)
    if isinstance(pairs, PairStream):
        parts = [scorer(left, right) for left, right in pairs.chunks()]
        return np.concatenate(parts) if parts else np.empty(0)
    if config.use_rsm:
        left, right = as_pair_arrays(pairs, gallery)
    else:
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        left, right = arr[:, 0], arr[:, 1]
    if left.size == 0:
        return np.empty(0)
    return scorer(left, right)


@dataclass
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray
    config: object = None
    protocol: object = None

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=np.float64).ravel()
        self.impostor = np.asarray(self.impostor, dtype=np.float64).ravel()


class Eer(NamedTuple):
    eer: float
    threshold: float


def _check_scores(scores):
    if scores.genuine.size == 0 or scores.impostor.size == 0:
        raise EmptyScores(
            f"need genuine and impostor scores, got {scores.genuine.size} and {scores.impostor.size}"
        )
    if not (np.isfinite(scores.genuine).all() and np.isfinite(scores.impostor).all()):
        raise EmptyScores("scores must be finite")


def _atoms(genuine, impostor):
    """Distinct score values with genuine and impostor multiplicities."""
    atoms = np.unique(np.concatenate([genuine, impostor]))
    g = np.searchsorted(np.sort(genuine), atoms, side="right")
    i = np.searchsorted(np.sort(impostor), atoms, side="right")
    return atoms, np.diff(g, prepend=0), np.diff(i, prepend=0)


def eer_from_atoms(atoms, gen_counts, imp_counts):
    """EER sweep over sorted score atoms with per-atom counts.

    Candidate thresholds are the atoms and the midpoints between neighbours;
    the sweep starts from a virtual point just below the lowest atom
    (FAR = 0, FRR = 1).  At the first candidate where FAR - FRR turns
    non-negative, the crossing is linearly interpolated from the previous
    candidate and the EER is the mean of the interpolated rates.  The
    reported threshold is whichever of those two candidates has the smaller
    ``|FAR - FRR|`` (the later one on ties), i.e. a real operating point.
    """
    n_gen, n_imp = int(gen_counts.sum()), int(imp_counts.sum())
    gen_le = np.cumsum(gen_counts)
    imp_le = np.cumsum(imp_counts)
    k = len(atoms)
    thr = np.empty(2 * k)
    far = np.empty(2 * k)
    frr = np.empty(2 * k)
    thr[0] = atoms[0]
    far[0], frr[0] = 0.0, 1.0
    thr[1::2] = atoms
    far[1::2] = imp_le / n_imp
    frr[1::2] = (n_gen - gen_le) / n_gen
    # midpoints share the rates of the atom below them
    thr[2::2] = (atoms[:-1] + atoms[1:]) / 2
    far[2::2] = far[1:-1:2]
    frr[2::2] = frr[1:-1:2]

    diff = far - frr
    hit = int(np.argmax(diff >= 0))
    # FAR - FRR is non-decreasing, so |FAR - FRR| is smallest at one of the
    # two candidates around the sign change
    best = hit if abs(diff[hit]) <= abs(diff[hit - 1]) else hit - 1
    if diff[hit] == 0:
        return Eer(float(far[hit]), float(thr[hit]))
    lam = -diff[hit - 1] / (diff[hit] - diff[hit - 1])
    far_x = far[hit - 1] + lam * (far[hit] - far[hit - 1])
    frr_x = frr[hit - 1] + lam * (frr[hit] - frr[hit - 1])
    return Eer(float((far_x + frr_x) / 2), float(thr[best]))


def compute_eer(scores, accept_above=False):
    """Equal error rate and its threshold.

    With ``accept_above`` the scores are similarities (accept when
    ``score >= threshold``); they are negated internally.
    """
    _check_scores(scores)
    if accept_above:
        res = eer_from_atoms(*_atoms(-scores.genuine, -scores.impostor))
        return Eer(res.eer, -res.threshold)
    return eer_from_atoms(*_atoms(scores.genuine, scores.impostor))


def roc_from_atoms(atoms, gen_counts, imp_counts, resolution):
    lo, hi = float(atoms[0]), float(atoms[-1])
    thresholds = lo + (np.arange(resolution) + 0.5) * ((hi - lo) / resolution)
    n_gen, n_imp = gen_counts.sum(), imp_counts.sum()
    pos = np.searchsorted(atoms, thresholds, side="right")
    gen_le = np.concatenate([[0], np.cumsum(gen_counts)])[pos]
    imp_le = np.concatenate([[0], np.cumsum(imp_counts)])[pos]
    far = imp_le / n_imp
    frr = (n_gen - gen_le) / n_gen
    return [(float(a), float(r), float(t)) for a, r, t in zip(far, frr, thresholds)]


def roc_points(scores, resolution=100):
    """``(far, frr, threshold)`` on ``resolution`` evenly spaced thresholds.

    Thresholds are the bin centres of ``[min score, max score]`` cut into
    ``resolution`` equal parts, so the sweep runs from the FAR ~ 0 end to
    the FRR ~ 0 end.
    """
    _check_scores(scores)
    if resolution < 1:
        raise ValueError("resolution must be positive")
    return roc_from_atoms(*_atoms(scores.genuine, scores.impostor), int(resolution))


def bin_count(lo, hi, width):
    span = (hi - lo) / width
    nearest = round(span)
    if abs(span - nearest) <= 1e-9 * max(1.0, span):
        return max(1, int(nearest))
    return int(math.ceil(span))


@dataclass
class Histogram:
    """Counts per half-open bin ``[lo + k*width, lo + (k+1)*width)``; the top
    edge ``hi`` belongs to the last bin.  Scores within 1e-9 bin widths
    below an edge are counted on the edge."""

    lo: float
    width: float
    counts: np.ndarray

    @property
    def edges(self):
        return self.lo + np.arange(len(self.counts)) * self.width

    @property
    def total(self):
        return int(self.counts.sum())

    def to_text(self):
        lines = ["bin_lower_edge\tcount"]
        lines += [f"{e:.10g}\t{int(c)}" for e, c in zip(self.edges, self.counts)]
        return "\n".join(lines) + "\n"


def histogram(scores, bin_width, range=(0.0, 1.0), clamp=False):
    """Fixed-width histogram of ``scores`` over ``range``.

    Raises:
        OutOfRangeScore: a score falls outside ``range`` and ``clamp`` is off.
    """
    lo, hi = float(range[0]), float(range[1])
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if not lo < hi:
        raise ValueError("range must satisfy lo < hi")
    values = np.asarray(scores, dtype=np.float64).ravel()
    outside = (values < lo) | (values > hi) | ~np.isfinite(values)
    if outside.any():
        if not clamp or not np.isfinite(values).all():
            raise OutOfRangeScore(f"score {values[outside][0]!r} outside [{lo}, {hi}]")
        values = np.clip(values, lo, hi)
    counts = np.zeros(bin_count(lo, hi, bin_width), dtype=np.int64)
    _kernels.backend.hist_add(np.ascontiguousarray(values), lo, float(bin_width), counts)
    return Histogram(lo, float(bin_width), counts)


class StreamingScores:
    """Fixed-resolution genuine/impostor score accumulator.

    Memory is O(bins) no matter how many scores are added; partial
    accumulators merge by integer addition, so the result does not depend on
    chunking or worker count.  Sweeps treat each non-empty bin as a score
    atom located at its upper edge.
    """

    def __init__(self, lo=0.0, hi=1.0, width=1e-6):
        self.lo, self.hi, self.width = float(lo), float(hi), float(width)
        n = bin_count(self.lo, self.hi, self.width)
        self.genuine = np.zeros(n, dtype=np.int64)
        self.impostor = np.zeros(n, dtype=np.int64)

    def add(self, scores, genuine):
        target = self.genuine if genuine else self.impostor
        scores = np.ascontiguousarray(scores, dtype=np.float64)
        if scores.size and ((scores < self.lo).any() or (scores > self.hi).any()):
            bad = scores[(scores < self.lo) | (scores > self.hi)][0]
            raise OutOfRangeScore(f"score {bad!r} outside [{self.lo}, {self.hi}]")
        _kernels.backend.hist_add(scores, self.lo, self.width, target)

    def merge(self, other):
        self.genuine += other.genuine
        self.impostor += other.impostor
        return self

    def _atoms(self):
        if self.genuine.sum() == 0 or self.impostor.sum() == 0:
            raise EmptyScores("need genuine and impostor scores")
        nz = np.flatnonzero((self.genuine > 0) | (self.impostor > 0))
        upper = self.lo + (nz + 1) * self.width
        return upper, self.genuine[nz], self.impostor[nz]

    def eer(self):
        return eer_from_atoms(*self._atoms())

    def roc(self, resolution=100):
        return roc_from_atoms(*self._atoms(), int(resolution))

    def coarse(self, width):
        """Histograms re-binned to ``width`` (a whole multiple of the fine width)."""
        factor = int(round(width / self.width))
        if factor < 1 or abs(factor * self.width - width) > 1e-9 * width:
            raise ValueError(f"bin width {width} is not a multiple of {self.width}")
        n = len(self.genuine)
        pad = (-n) % factor

        def fold(counts):
            return np.concatenate([counts, np.zeros(pad, dtype=np.int64)]).reshape(-1, factor).sum(axis=1)

        return Histogram(self.lo, width, fold(self.genuine)), Histogram(self.lo, width, fold(self.impostor))


FALSE_ACCEPT = "FalseAccept"
FALSE_REJECT = "FalseReject"


@dataclass(frozen=True)
class TroublePair:
    pair: tuple
    baseline_score: float
    rsm_score: float
    error_kind: str


def overlap_count(genuine, impostor):
    """Scores lying in the shared range ``[min impostor, max genuine]``.

    Zero when either side is empty or the ranges are disjoint.
    """
    genuine = np.asarray(genuine, dtype=np.float64)
    impostor = np.asarray(impostor, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        return 0
    lo, hi = impostor.min(), genuine.max()
    if lo > hi:
        return 0
    inside = lambda s: int(((s >= lo) & (s <= hi)).sum())  # noqa: E731
    return inside(genuine) + inside(impostor)


@dataclass
class TroubleReport:
    threshold: float
    pairs: list = field(default_factory=list)
    baseline_overlap: int = 0
    rsm_overlap: int = 0

    @property
    def false_accepts(self):
        return sum(p.error_kind == FALSE_ACCEPT for p in self.pairs)

    @property
    def false_rejects(self):
        return sum(p.error_kind == FALSE_REJECT for p in self.pairs)


def _pair_array(pairs):
    if isinstance(pairs, PairStream):
        return pairs.to_array()
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def select_trouble(threshold, gen_pairs, gen_base, gen_rsm, imp_pairs, imp_base, imp_rsm):
    """Trouble listing for one pass: genuine scored above, impostor at or below."""
    out = []
    g = np.flatnonzero(gen_base > threshold)
    i = np.flatnonzero(imp_base <= threshold)
    for pairs, base, cand, idx, kind in (
        (gen_pairs, gen_base, gen_rsm, g, FALSE_REJECT),
        (imp_pairs, imp_base, imp_rsm, i, FALSE_ACCEPT),
    ):
        for t in idx:
            out.append(
                TroublePair((int(pairs[t][0]), int(pairs[t][1])), float(base[t]), float(cand[t]), kind)
            )
    return out


def summarize_trouble(threshold, listing):
    gen = [p for p in listing if p.error_kind == FALSE_REJECT]
    imp = [p for p in listing if p.error_kind == FALSE_ACCEPT]
    return TroubleReport(
        threshold=threshold,
        pairs=listing,
        baseline_overlap=overlap_count([p.baseline_score for p in gen], [p.baseline_score for p in imp]),
        rsm_overlap=overlap_count([p.rsm_score for p in gen], [p.rsm_score for p in imp]),
    )


def trouble_pairs(baseline, rsm, pairs):
    """Pairs the baseline misclassifies at its own EER threshold.

    Args:
        baseline: ScoreSet from the baseline metric.
        rsm: ScoreSet from the candidate metric over the same pairs.
        pairs: ``(genuine_pairs, impostor_pairs)`` aligned with both score sets.

    Returns:
        TroubleReport with the listing (genuine first, then impostor, each in
        pair order) and the trouble-score overlap count under each metric.
    """
    gen_pairs, imp_pairs = (_pair_array(p) for p in pairs)
    sizes = {
        "baseline": (baseline.genuine.size, baseline.impostor.size),
        "rsm": (rsm.genuine.size, rsm.impostor.size),
        "pairs": (len(gen_pairs), len(imp_pairs)),
    }
    if len(set(sizes.values())) != 1:
        raise PairSequenceMismatch(f"score and pair sequence lengths differ: {sizes}")
    threshold = compute_eer(baseline).threshold
    listing = select_trouble(
        threshold, gen_pairs, baseline.genuine, rsm.genuine, imp_pairs, baseline.impostor, rsm.impostor
    )
    return summarize_trouble(threshold, listing)
