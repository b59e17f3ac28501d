"""Throughput measurements for the kernel and RSM batch paths.

Every timed path runs once per available backend (compiled and pure
Python) on identical inputs, and the outputs are compared bit for bit.
"""

import time
from contextlib import contextmanager

import numpy as np

from . import _kernels
from .evaluation import PairProtocol
from .model import BaseMetric, MetricConfig, PayloadKind
from .pipeline import run_evaluation
from .rng import PortableRng
from .rsm import RsmEngine
from .similarity import pair_scores
from .synth import SynthSpec, generate_gallery

STREAM_BENCH = 0xBE7C


@contextmanager
def use_backend(name):
    """Temporarily route all kernel calls through backend ``name``."""
    saved = _kernels.backend
    _kernels.backend = _kernels.AVAILABLE[name]
    try:
        yield
    finally:
        _kernels.backend = saved


def _timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _random_pairs(n, count, seed):
    rng = PortableRng(seed, STREAM_BENCH)
    # modulo bias is irrelevant for a timing workload
    left = (rng.raw(count) % np.uint64(n)).astype(np.int64)
    right = (rng.raw(count) % np.uint64(n - 1)).astype(np.int64)
    right += right >= left  # never pair a record with itself
    return left, right


def run_bench(n=2000, dim=64, bits=128, pairs=200_000, m_refs=30, repeat=3, seed=0, backends=None):
    """Time base kernels and RSM for every backend.

    Returns a list of result dicts with keys ``path``, ``backend``,
    ``pairs``, ``seconds``, ``pairs_per_second`` and ``matches_reference``
    (bit-identical to the first backend's output).
    """
    backends = list(backends or _kernels.AVAILABLE)
    per = max(1, n // 20)
    real = generate_gallery(SynthSpec(num_classes=10, per_class_per_session=per, dim=dim, seed=seed))
    binary = generate_gallery(
        SynthSpec(num_classes=10, per_class_per_session=per, bits=bits, seed=seed,
                  payload_kind=PayloadKind.BINARY)
    )
    left, right = _random_pairs(len(real), pairs, seed)

    paths = []
    for metric in BaseMetric:
        gallery = binary if metric.payload_kind is PayloadKind.BINARY else real
        paths.append((metric.value, lambda g=gallery, m=metric: pair_scores(left, right, g, m)))
    for metric in (BaseMetric.COSINE, BaseMetric.HAMMING):
        gallery = binary if metric.payload_kind is PayloadKind.BINARY else real
        cfg = MetricConfig(base_metric=metric, use_rsm=True, m_refs=m_refs, seed=seed)

        def rsm_path(g=gallery, c=cfg):
            return RsmEngine(g, c).score_arrays(left, right)[0]

        paths.append((f"rsm-{metric.value}", rsm_path))

    results = []
    for path, fn in paths:
        reference = None
        for name in backends:
            with use_backend(name):
                seconds, out = _timed(fn, repeat)
            if reference is None:
                reference = out
            results.append({
                "path": path,
                "backend": name,
                "pairs": pairs,
                "seconds": seconds,
                "pairs_per_second": pairs / seconds if seconds > 0 else float("inf"),
                "matches_reference": bool(np.array_equal(out, reference)),
            })
    return results


def tongji_eval(workers=1, m_refs=30, seed=0, bits=128):
    """Full-scale streamed cross-session evaluation on a 600 x (10 + 10)
    synthetic Hamming gallery.  Returns ``(seconds, Evaluation)``."""
    spec = SynthSpec(num_classes=600, per_class_per_session=10, bits=bits, seed=seed,
                     payload_kind=PayloadKind.BINARY, outlier_rate=0.01, outlier_spread=0.5)
    gallery = generate_gallery(spec)
    base = MetricConfig(base_metric=BaseMetric.HAMMING, seed=seed)
    cand = MetricConfig(base_metric=BaseMetric.HAMMING, use_rsm=True, m_refs=m_refs, seed=seed)
    t0 = time.perf_counter()
    result = run_evaluation(gallery, PairProtocol.cross_session(), base, cand, mode="streamed", workers=workers)
    return time.perf_counter() - t0, result


def format_results(results):
    lines = [f"{'path':<16}{'backend':<10}{'pairs':>10}{'seconds':>11}{'pairs/s':>14}  identical"]
    for r in results:
        lines.append(
            f"{r['path']:<16}{r['backend']:<10}{r['pairs']:>10}{r['seconds']:>11.4f}"
            f"{r['pairs_per_second']:>14.3e}  {'yes' if r['matches_reference'] else 'NO'}"
        )
    return "\n".join(lines)
