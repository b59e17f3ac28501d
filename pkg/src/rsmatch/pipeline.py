"""Baseline-vs-candidate evaluation over one pair stream.

Both metrics score the identical pair stream in a single pass, so trouble
pairs never suffer ordering mismatches.  Two modes:

* ``exact``: every score is kept; EER, ROC and histograms are computed from
  the raw values.
* ``streamed``: scores are folded into fixed-resolution histograms
  (1e-6 wide by default) and never stored; trouble pairs are collected in a
  second pass once the baseline threshold is known.

Work is split into pair blocks.  Workers only produce integer counts or
per-block lists that are merged in block order, so the output is identical
for any worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evaluation import (
    DEFAULT_CHUNK,
    ScoreSet,
    StreamingScores,
    compute_eer,
    enumerate_pairs,
    histogram,
    make_scorer,
    roc_points,
    select_trouble,
    summarize_trouble,
    trouble_pairs,
)

EXACT_LIMIT = 5_000_000


@dataclass
class EvalReport:
    name: str
    config: object
    protocol: object
    mode: str
    genuine_count: int
    impostor_count: int
    eer: float
    threshold: float
    roc: list
    genuine_hist: object
    impostor_hist: object
    trouble_pairs: list = field(default_factory=list)
    trouble_overlap: int = 0
    references: tuple = None

    def to_dict(self):
        out = {
            "role": self.name,
            "config": self.config.to_dict(),
            "protocol": self.protocol.to_dict(),
            "mode": self.mode,
            "pairs": {"genuine": self.genuine_count, "impostor": self.impostor_count},
            "eer": self.eer,
            "eer_percent": self.eer * 100.0,
            "threshold": self.threshold,
        }
        if self.references is not None:
            out["references"] = list(self.references)
        out["trouble"] = {
            "count": len(self.trouble_pairs),
            "overlap": self.trouble_overlap,
        }
        out["roc"] = [list(p) for p in self.roc]
        out["histogram"] = {
            "lo": self.genuine_hist.lo,
            "bin_width": self.genuine_hist.width,
            "genuine": self.genuine_hist.counts.tolist(),
            "impostor": self.impostor_hist.counts.tolist(),
        }
        return out


@dataclass
class Evaluation:
    baseline: EvalReport
    candidate: EvalReport
    trouble: object
    scores: tuple = None  # (baseline, candidate) ScoreSets, exact mode only

    @property
    def relative_improvement(self):
        b = self.baseline.eer
        return (b - self.candidate.eer) / b if b > 0 else 0.0

    def comparison(self, max_listed=100):
        listing = [
            {
                "pair": list(p.pair),
                "baseline_score": p.baseline_score,
                "candidate_score": p.rsm_score,
                "error_kind": p.error_kind,
            }
            for p in self.trouble.pairs[:max_listed]
        ]
        return {
            "pairs": {"genuine": self.baseline.genuine_count, "impostor": self.baseline.impostor_count},
            "baseline_eer": self.baseline.eer,
            "candidate_eer": self.candidate.eer,
            "baseline_eer_percent": self.baseline.eer * 100.0,
            "candidate_eer_percent": self.candidate.eer * 100.0,
            "relative_improvement": self.relative_improvement,
            "trouble": {
                "threshold": self.trouble.threshold,
                "count": len(self.trouble.pairs),
                "false_accepts": self.trouble.false_accepts,
                "false_rejects": self.trouble.false_rejects,
                "baseline_overlap": self.trouble.baseline_overlap,
                "candidate_overlap": self.trouble.rsm_overlap,
                "listed": len(listing),
                "pairs": listing,
            },
        }


def _shares_direct(baseline, candidate):
    return (not baseline.use_rsm) and candidate.base_metric is baseline.base_metric


def _map_blocks(fn, n_blocks, workers):
    if workers <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


def run_evaluation(
    gallery,
    protocol,
    baseline,
    candidate,
    mode="auto",
    workers=1,
    chunk_size=DEFAULT_CHUNK,
    roc_resolution=100,
    hist_width=0.01,
    fine_width=1e-6,
):
    """Evaluate ``baseline`` and ``candidate`` metric configs on ``gallery``."""
    gen_stream, imp_stream = enumerate_pairs(gallery, protocol, chunk_size)
    if mode == "auto":
        mode = "exact" if gen_stream.count + imp_stream.count <= EXACT_LIMIT else "streamed"
    if mode not in ("exact", "streamed"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    workers = max(1, int(workers))

    base_score = make_scorer(gallery, baseline)
    cand_score = make_scorer(gallery, candidate)
    share = _shares_direct(baseline, candidate)

    def score_block(stream, b):
        left, right = stream.block(b)
        base = base_score(left, right)
        cand = cand_score(left, right, direct=base if share else None)
        return left, right, base, cand

    common = dict(gallery=gallery, protocol=protocol, baseline=baseline, candidate=candidate)
    if mode == "exact":
        result = _run_exact(gen_stream, imp_stream, score_block, workers, roc_resolution, hist_width, common)
    else:
        result = _run_streamed(
            gen_stream, imp_stream, score_block, base_score, cand_score, share,
            workers, roc_resolution, hist_width, fine_width, common,
        )
    for report, scorer in ((result.baseline, base_score), (result.candidate, cand_score)):
        engine = getattr(scorer, "engine", None)
        if engine is not None and engine.refs is not None:
            report.references = engine.refs.indices
    return result


def _report(name, config, protocol, mode, counts, eer, roc, hists, trouble, overlap):
    return EvalReport(
        name=name,
        config=config,
        protocol=protocol,
        mode=mode,
        genuine_count=counts[0],
        impostor_count=counts[1],
        eer=eer.eer,
        threshold=eer.threshold,
        roc=roc,
        genuine_hist=hists[0],
        impostor_hist=hists[1],
        trouble_pairs=trouble,
        trouble_overlap=overlap,
    )


def _run_exact(gen_stream, imp_stream, score_block, workers, roc_resolution, hist_width, common):
    collected = []
    for stream in (gen_stream, imp_stream):
        parts = _map_blocks(lambda b, s=stream: score_block(s, b), stream.num_blocks, workers)
        if parts:
            cols = [np.concatenate(c) for c in zip(*parts)]
        else:
            cols = [np.empty(0, dtype=np.int64)] * 2 + [np.empty(0)] * 2
        collected.append(cols)
    (gl, gr, gb, gc), (il, ir, ib, ic) = collected
    base_set = ScoreSet(gb, ib, common["baseline"], common["protocol"])
    cand_set = ScoreSet(gc, ic, common["candidate"], common["protocol"])
    trouble = trouble_pairs(
        base_set, cand_set, (np.stack([gl, gr], axis=1), np.stack([il, ir], axis=1))
    )
    counts = (gb.size, ib.size)
    reports = []
    for name, cfg, sset, overlap in (
        ("baseline", common["baseline"], base_set, trouble.baseline_overlap),
        ("candidate", common["candidate"], cand_set, trouble.rsm_overlap),
    ):
        upper = cfg.score_upper_bound
        hists = (
            histogram(sset.genuine, hist_width, (0.0, upper)),
            histogram(sset.impostor, hist_width, (0.0, upper)),
        )
        reports.append(
            _report(
                name, cfg, common["protocol"], "exact", counts,
                compute_eer(sset), roc_points(sset, roc_resolution), hists, trouble.pairs, overlap,
            )
        )
    return Evaluation(reports[0], reports[1], trouble, (base_set, cand_set))


def _run_streamed(
    gen_stream, imp_stream, score_block, base_score, cand_score, share,
    workers, roc_resolution, hist_width, fine_width, common,
):
    baseline, candidate = common["baseline"], common["candidate"]
    tasks = [(s, b) for s in (gen_stream, imp_stream) for b in range(s.num_blocks)]

    def accumulate(worker):
        base_acc = StreamingScores(0.0, baseline.score_upper_bound, fine_width)
        cand_acc = StreamingScores(0.0, candidate.score_upper_bound, fine_width)
        for stream, b in tasks[worker::workers]:
            _, _, base, cand = score_block(stream, b)
            base_acc.add(base, stream.genuine)
            cand_acc.add(cand, stream.genuine)
        return base_acc, cand_acc

    partials = _map_blocks(accumulate, workers, workers)
    base_acc, cand_acc = partials[0]
    for b_part, c_part in partials[1:]:
        base_acc.merge(b_part)
        cand_acc.merge(c_part)

    base_eer = base_acc.eer()
    cand_eer = cand_acc.eer()
    threshold = base_eer.threshold

    def trouble_block(task):
        stream, b = task
        left, right = stream.block(b)
        base = base_score(left, right)
        sel = np.flatnonzero(base > threshold) if stream.genuine else np.flatnonzero(base <= threshold)
        if sel.size == 0:
            return []
        cand = cand_score(left[sel], right[sel], direct=base[sel] if share else None)
        pairs = np.stack([left[sel], right[sel]], axis=1)
        empty_pairs, empty_scores = np.empty((0, 2), dtype=np.int64), np.empty(0)
        if stream.genuine:
            return select_trouble(threshold, pairs, base[sel], cand, empty_pairs, empty_scores, empty_scores)
        return select_trouble(threshold, empty_pairs, empty_scores, empty_scores, pairs, base[sel], cand)

    listing = [p for part in _map_blocks(lambda t: trouble_block(tasks[t]), len(tasks), workers) for p in part]
    trouble = summarize_trouble(threshold, listing)

    counts = (int(base_acc.genuine.sum()), int(base_acc.impostor.sum()))
    reports = []
    for name, cfg, acc, eer, overlap in (
        ("baseline", baseline, base_acc, base_eer, trouble.baseline_overlap),
        ("candidate", candidate, cand_acc, cand_eer, trouble.rsm_overlap),
    ):
        reports.append(
            _report(
                name, cfg, common["protocol"], "streamed", counts,
                eer, acc.roc(roc_resolution), acc.coarse(hist_width), listing, overlap,
            )
        )
    return Evaluation(reports[0], reports[1], trouble)
