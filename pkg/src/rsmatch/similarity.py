"""Base distance kernels on the [0, 1] dissimilarity scale (0 = identical).

Scalar kernels route through the same backend routines as
:func:`score_matrix`, so a matrix entry is bit-identical to the scalar call
on the corresponding records.
"""

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    IncompatibleMetric,
    IndexOutOfRange,
    LengthMismatch,
    NotNormalized,
)
from .model import NORM_TOLERANCE, BaseMetric, BitCode, unit_rows


def _unit_pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dimensions differ: {a.size} vs {b.size}")
    for name, v in (("a", a), ("b", b)):
        norm = float(np.sqrt(np.dot(v, v)))
        if not abs(norm - 1.0) <= NORM_TOLERANCE:
            raise NotNormalized(f"{name} has norm {norm!r}, expected 1 within {NORM_TOLERANCE}")
    return unit_rows(a), unit_rows(b)


def cosine_distance(a, b):
    """``(1 - cos(a, b)) / 2`` for unit vectors ``a`` and ``b``.

    Evaluated as ``|a - b|^2 / 4``, which is the same quantity on the unit
    sphere but exact for identical vectors and free of cancellation for
    near-duplicates.
    """
    ua, ub = _unit_pair(a, b)
    return float(_kernels.backend.cosine_matrix(ua, ub)[0, 0])


def euclidean_distance_normalized(a, b):
    """``||a - b|| / 2`` for unit vectors; the sphere diameter maps to 1."""
    ua, ub = _unit_pair(a, b)
    return float(_kernels.backend.euclidean_matrix(ua, ub)[0, 0])


def _words(code):
    raw = code.data
    pad = (-len(raw)) % 8
    return np.frombuffer(raw + b"\0" * pad, dtype="<u8").astype(np.uint64)[None, :]


def hamming_distance_normalized(a, b):
    """Fraction of differing bits between two packed codes."""
    if not isinstance(a, BitCode) or not isinstance(b, BitCode):
        raise TypeError("hamming distance needs BitCode operands")
    if a.nbits != b.nbits:
        raise LengthMismatch(f"bit lengths differ: {a.nbits} vs {b.nbits}")
    return float(_kernels.backend.hamming_matrix(_words(a), _words(b), a.nbits)[0, 0])


KERNELS = {
    BaseMetric.COSINE: cosine_distance,
    BaseMetric.EUCLIDEAN: euclidean_distance_normalized,
    BaseMetric.HAMMING: hamming_distance_normalized,
}


def pair_distance(record_a, record_b, base_metric):
    """Scalar kernel applied to two feature records."""
    base_metric = BaseMetric(base_metric)
    if record_a.kind is not base_metric.payload_kind or record_b.kind is not base_metric.payload_kind:
        raise IncompatibleMetric(f"{base_metric.value} distance needs {base_metric.payload_kind.value} payloads")
    return KERNELS[base_metric](record_a.payload, record_b.payload)


def check_metric(gallery, base_metric):
    base_metric = BaseMetric(base_metric)
    if gallery.kind is not base_metric.payload_kind:
        raise IncompatibleMetric(
            f"{base_metric.value} distance is undefined on {gallery.kind.value} payloads"
        )
    return base_metric


def _checked_indices(gallery, indices):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    bad = (idx < 0) | (idx >= len(gallery))
    if bad.any():
        raise IndexOutOfRange(f"index {int(idx[bad][0])} outside gallery of {len(gallery)} records")
    return idx


def score_matrix(probes, refs, gallery, base_metric):
    """Dense ``len(probes) x len(refs)`` matrix of base distances."""
    base_metric = check_metric(gallery, base_metric)
    p = _checked_indices(gallery, probes)
    r = _checked_indices(gallery, refs)
    if base_metric is BaseMetric.HAMMING:
        return _kernels.backend.hamming_matrix(gallery.words[p], gallery.words[r], gallery.dim)
    if base_metric is BaseMetric.COSINE:
        return _kernels.backend.cosine_matrix(gallery.unit[p], gallery.unit[r])
    return _kernels.backend.euclidean_matrix(gallery.unit[p], gallery.unit[r])


def pair_scores(left, right, gallery, base_metric):
    """Base distances for index pairs ``(left[t], right[t])`` without forming a matrix."""
    base_metric = check_metric(gallery, base_metric)
    left = np.ascontiguousarray(_checked_indices(gallery, left))
    right = np.ascontiguousarray(_checked_indices(gallery, right))
    if left.shape != right.shape:
        raise ValueError("left and right index arrays differ in length")
    if base_metric is BaseMetric.HAMMING:
        return _kernels.backend.hamming_pairs(gallery.words, left, right, gallery.dim)
    if base_metric is BaseMetric.COSINE:
        return _kernels.backend.cosine_pairs(gallery.unit, left, right)
    return _kernels.backend.euclidean_pairs(gallery.unit, left, right)
