"""Pure numpy implementation of the hot kernels.

Arithmetic mirrors ``_core.pyx`` operation by operation (sequential
accumulation over coordinates and references, no fused multiply-add), so the
two backends return bit-identical results.
"""

import numpy as np

_PAIR_BLOCK = 1 << 16
EDGE_SNAP = 1e-9


def _clamp(x):
    np.clip(x, 0.0, 1.0, out=x)
    return x


def cosine_matrix(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    # (1 - a.b) / 2 == |a - b|^2 / 4 on unit vectors; the difference form is
    # exactly 0 for identical rows and avoids cancellation for close pairs
    acc = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        diff = np.subtract.outer(a[:, k], b[:, k])
        acc += diff * diff
    return _clamp(acc * 0.25)


def euclidean_matrix(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    acc = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        diff = np.subtract.outer(a[:, k], b[:, k])
        acc += diff * diff
    return _clamp(np.sqrt(acc) * 0.5)


def hamming_matrix(a, b, nbits):
    counts = np.zeros((a.shape[0], b.shape[0]), dtype=np.int64)
    for w in range(a.shape[1]):
        counts += np.bitwise_count(np.bitwise_xor.outer(a[:, w], b[:, w]))
    return _clamp(counts / float(nbits))


def cosine_pairs(x, left, right):
    out = np.empty(len(left))
    for start in range(0, len(left), _PAIR_BLOCK):
        sl = slice(start, start + _PAIR_BLOCK)
        a, b = x[left[sl]], x[right[sl]]
        acc = np.zeros(a.shape[0])
        for k in range(a.shape[1]):
            diff = a[:, k] - b[:, k]
            acc += diff * diff
        out[sl] = acc * 0.25
    return _clamp(out)


def euclidean_pairs(x, left, right):
    out = np.empty(len(left))
    for start in range(0, len(left), _PAIR_BLOCK):
        sl = slice(start, start + _PAIR_BLOCK)
        a, b = x[left[sl]], x[right[sl]]
        acc = np.zeros(a.shape[0])
        for k in range(a.shape[1]):
            diff = a[:, k] - b[:, k]
            acc += diff * diff
        out[sl] = np.sqrt(acc) * 0.5
    return _clamp(out)


def hamming_pairs(words, left, right, nbits):
    out = np.empty(len(left))
    for start in range(0, len(left), _PAIR_BLOCK):
        sl = slice(start, start + _PAIR_BLOCK)
        counts = np.bitwise_count(words[left[sl]] ^ words[right[sl]]).sum(axis=1, dtype=np.int64)
        out[sl] = counts / float(nbits)
    return _clamp(out)


def rsm_pairs(table, ref_idx, direct, left, right, alpha):
    """Relative-similarity scores for index pairs.

    ``table[n, k]`` is the base distance from gallery record ``n`` to the
    reference ``ref_idx[k]``; references equal to either pair member are
    skipped.  Returns ``(value, relative, m_used)``; pairs with no usable
    reference get NaN values and ``m_used == 0``.
    """
    n = len(left)
    value = np.empty(n)
    relative = np.empty(n)
    m_used = np.empty(n, dtype=np.int64)
    for start in range(0, n, _PAIR_BLOCK):
        sl = slice(start, start + _PAIR_BLOCK)
        li, ri = left[sl], right[sl]
        tl, tr = table[li], table[ri]
        acc = np.zeros(len(li))
        used = np.zeros(len(li), dtype=np.int64)
        for k in range(len(ref_idx)):
            keep = (li != ref_idx[k]) & (ri != ref_idx[k])
            acc += np.where(keep, np.abs(tl[:, k] - tr[:, k]), 0.0)
            used += keep
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(used > 0, acc / used, np.nan)
        relative[sl] = rel
        value[sl] = rel + alpha * direct[sl]
        m_used[sl] = used
    return value, relative, m_used


def hist_add(scores, lo, width, counts):
    """Add ``scores`` into fixed-width bins ``[lo + k*width, lo + (k+1)*width)``.

    A score within ``EDGE_SNAP`` bin widths below an edge counts as on the
    edge, so decimal values such as 0.3 with width 0.1 land in the bin they
    name despite binary rounding.  Scores outside the covered range land in
    the first or last bin.
    """
    nbins = counts.shape[0]
    k = np.floor((scores - lo) / width + EDGE_SNAP)
    k = np.clip(k, 0, nbins - 1).astype(np.int64)
    counts += np.bincount(k, minlength=nbins)
    return counts
