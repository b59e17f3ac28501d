"""Command-line entry point: ``rsmatch <command> ...``.

Commands: synth, ingest, score, eval, hist, bench.  Failures print a single
line ``error: <Code>: <message>`` to stderr and exit nonzero (2 for usage
errors, 1 otherwise).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import _kernels
from .bench import format_results, run_bench, tongji_eval
from .config import RunConfig, load_config
from .errors import InvalidPair, RsmError, UsageError
from .evaluation import PairProtocol, ProtocolKind, histogram
from .fileio import read_embeddings, read_jsonl, read_scores, write_embeddings, write_scores
from .model import BaseMetric, MetricConfig, PayloadKind, SamplingPolicy
from .pipeline import run_evaluation
from .rsm import RsmEngine, as_pair_arrays
from .similarity import pair_scores
from .synth import SynthSpec, generate_gallery

METRIC_CHOICES = [m.value for m in BaseMetric]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _add_metric_flags(p, with_rsm=True):
    p.add_argument("--metric", choices=METRIC_CHOICES, help="base distance")
    if with_rsm:
        p.add_argument("--rsm", action="store_true", help="score with the relative similarity metric")
    p.add_argument("--alpha", type=float, help="weight of the direct distance in RSM (default 1)")
    p.add_argument("--m-refs", type=int, help="number of reference records (default 30)")
    p.add_argument("--sampling", choices=[s.value for s in SamplingPolicy], help="reference sampling policy")
    p.add_argument("--seed", type=_u64, help="reference sampling seed")


def _metric_from_flags(args, base=None, use_rsm=None):
    base = base or MetricConfig()
    changes = base.to_dict()
    if args.metric is not None:
        changes["base_metric"] = args.metric
    if use_rsm is not None:
        changes["use_rsm"] = use_rsm
    for flag, key in (("alpha", "alpha"), ("m_refs", "m_refs"), ("sampling", "sampling_policy"), ("seed", "seed")):
        value = getattr(args, flag)
        if value is not None:
            changes[key] = value
    return MetricConfig.from_dict(changes)


def _build_parser():
    parser = _Parser(prog="rsmatch", description="Relative similarity matching toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write a seeded synthetic gallery")
    p.add_argument("-o", "--output", help="embedding file to write")
    p.add_argument("--config", help="JSON run config (its 'synth' section is used)")
    p.add_argument("--classes", type=int, dest="num_classes")
    p.add_argument("--per-session", type=int, dest="per_class_per_session")
    p.add_argument("--dim", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--kind", choices=[k.value for k in PayloadKind], dest="payload_kind")
    p.add_argument("--intra-spread", type=float)
    p.add_argument("--outlier-rate", type=float)
    p.add_argument("--outlier-spread", type=float)
    p.add_argument("--identity-rank", type=int)
    p.add_argument("--seed", type=_u64)

    p = sub.add_parser("ingest", help="convert JSON lines to an embedding file")
    p.add_argument("input", help="JSON-lines file")
    p.add_argument("-o", "--output", required=True, help="embedding file to write")

    p = sub.add_parser("score", help="score record pairs and print the components")
    p.add_argument("gallery", help="embedding file")
    p.add_argument("ids", nargs="*", help="two record ids")
    p.add_argument("--pairs", help="file with one 'id_a id_b' pair per line")
    _add_metric_flags(p)

    p = sub.add_parser("eval", help="baseline vs RSM evaluation over a pair protocol")
    p.add_argument("gallery", nargs="?", help="embedding file (or 'input' in the config)")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--protocol", choices=[k.value for k in ProtocolKind])
    p.add_argument("--out", help="output directory")
    _add_metric_flags(p, with_rsm=False)
    p.add_argument("--mode", choices=["auto", "exact", "streamed"])
    p.add_argument("--workers", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--roc-resolution", type=int)
    p.add_argument("--hist-width", type=float)
    p.add_argument("--save-scores", action="store_true", help="also write score files (exact mode)")

    p = sub.add_parser("hist", help="histograms of a genuine/impostor score file")
    p.add_argument("scores", help="file with a 'kind<TAB>score' header")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bin-width", type=float, default=0.01)
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--clamp", action="store_true", help="fold out-of-range scores into the end bins")

    p = sub.add_parser("bench", help="time kernel and RSM throughput per backend")
    p.add_argument("--n", type=int, default=2000, help="gallery size")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--bits", type=int, default=128)
    p.add_argument("--pairs", type=int, default=200_000)
    p.add_argument("--m-refs", type=int, default=30)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--backend", choices=["all", "compiled", "fallback"], default="all")
    p.add_argument("--tongji", action="store_true", help="also run the full-scale streamed evaluation")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _cmd_synth(args, out):
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = cfg.synth.to_dict()
    for key in ("num_classes", "per_class_per_session", "dim", "bits", "payload_kind", "intra_spread",
                "outlier_rate", "outlier_spread", "identity_rank", "seed"):
        value = getattr(args, key)
        if value is not None:
            changes[key] = value
    spec = SynthSpec.from_dict(changes)
    path = args.output or (os.path.join(cfg.out, "gallery.rsmf") if cfg.out else None)
    if not path:
        raise UsageError("synth: an output path is required (-o/--output)")
    _ensure_parent(path)
    gallery = generate_gallery(spec)
    write_embeddings(gallery, path)
    print(f"wrote {len(gallery)} {spec.payload_kind.value} records ({gallery.class_count} classes) to {path}", file=out)


def _cmd_ingest(args, out):
    gallery = read_jsonl(args.input)
    _ensure_parent(args.output)
    write_embeddings(gallery, args.output)
    print(f"wrote {len(gallery)} {gallery.kind.value} records to {args.output}", file=out)


def _read_pair_ids(args):
    if args.pairs:
        if args.ids:
            raise UsageError("score: give either two ids or --pairs, not both")
        pairs = []
        with open(args.pairs, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                parts = text.split()
                if len(parts) != 2:
                    raise UsageError(f"score: {args.pairs} line {lineno}: expected two ids")
                pairs.append(tuple(parts))
        return pairs
    if len(args.ids) != 2:
        raise UsageError("score: expected exactly two record ids (or --pairs)")
    return [tuple(args.ids)]


def _cmd_score(args, out):
    gallery = read_embeddings(args.gallery)
    config = _metric_from_flags(args, use_rsm=args.rsm)
    if args.metric is None:
        config = MetricConfig.from_dict({**config.to_dict(), "base_metric": _default_metric(gallery.kind).value})
    index = {}
    for k, rid in enumerate(gallery.ids):
        index.setdefault(rid, k)
    pairs = []
    for a, b in _read_pair_ids(args):
        for rid in (a, b):
            if rid not in index:
                raise UsageError(f"score: unknown record id {rid!r}")
        if a == b:
            raise InvalidPair(f"cannot score record {a!r} against itself")
        pairs.append((index[a], index[b]))
    left, right = as_pair_arrays(pairs, gallery)

    if config.use_rsm:
        value, relative, direct, m_used = RsmEngine(gallery, config).score_arrays(left, right)
    else:
        direct = pair_scores(left, right, gallery, config.base_metric)
        value, relative, m_used = direct, np.full(direct.size, np.nan), np.zeros(direct.size, dtype=np.int64)
    print("id_a\tid_b\tscore\tdirect\trelative\tm_used", file=out)
    for t in range(left.size):
        rel = "" if np.isnan(relative[t]) else repr(float(relative[t]))
        print(
            f"{gallery.ids[left[t]]}\t{gallery.ids[right[t]]}\t{float(value[t])!r}\t"
            f"{float(direct[t])!r}\t{rel}\t{int(m_used[t])}",
            file=out,
        )


def _explicit_metric_roles(args):
    """Roles whose base metric was set by a flag or in the config file."""
    if args.metric is not None:
        return {"baseline", "candidate"}
    if not args.config:
        return set()
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    return {role for role in ("baseline", "candidate") if "base_metric" in data.get(role, {})}


def _default_metric(kind):
    return BaseMetric.HAMMING if kind is PayloadKind.BINARY else BaseMetric.COSINE


def _fit_metrics(cfg, args, kind):
    # an unspecified base metric follows the gallery's payload kind
    explicit = _explicit_metric_roles(args)
    changes = {}
    for role in ("baseline", "candidate"):
        metric = getattr(cfg, role)
        if role not in explicit and metric.base_metric.payload_kind is not kind:
            changes[role] = MetricConfig.from_dict({**metric.to_dict(), "base_metric": _default_metric(kind).value})
    return cfg.with_overrides(**changes)


def _eval_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    protocol = PairProtocol(ProtocolKind(args.protocol)) if args.protocol else None
    baseline = candidate = None
    if args.metric is not None or args.seed is not None:
        baseline = _metric_from_flags(argparse.Namespace(
            metric=args.metric, alpha=None, m_refs=None, sampling=None, seed=args.seed
        ), base=cfg.baseline, use_rsm=False)
    if any(getattr(args, k) is not None for k in ("metric", "alpha", "m_refs", "sampling", "seed")):
        candidate = _metric_from_flags(args, base=cfg.candidate, use_rsm=True)
    ev = {}
    for key in ("mode", "workers", "chunk_size", "roc_resolution", "hist_width"):
        value = getattr(args, key)
        if value is not None:
            ev[key] = value
    return cfg.with_overrides(
        input=args.gallery, out=args.out, protocol=protocol,
        baseline=baseline, candidate=candidate, eval=ev or None,
    )


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _dump_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _cmd_eval(args, out):
    cfg = _eval_config(args)
    if not cfg.input:
        raise UsageError("eval: a gallery file is required (argument or 'input' in the config)")
    if not cfg.out:
        raise UsageError("eval: an output directory is required (--out or 'out' in the config)")
    gallery = read_embeddings(cfg.input)
    cfg = _fit_metrics(cfg, args, gallery.kind)
    ev = cfg.eval
    result = run_evaluation(
        gallery, cfg.protocol, cfg.baseline, cfg.candidate,
        mode=ev["mode"], workers=ev["workers"], chunk_size=ev["chunk_size"],
        roc_resolution=ev["roc_resolution"], hist_width=ev["hist_width"],
    )
    os.makedirs(cfg.out, exist_ok=True)
    run = cfg.to_dict(provenance=True)
    for report in (result.baseline, result.candidate):
        data = report.to_dict()
        data["run"] = run
        _dump_json(os.path.join(cfg.out, f"report_{report.name}.json"), data)
        for kind, hist in (("genuine", report.genuine_hist), ("impostor", report.impostor_hist)):
            with open(os.path.join(cfg.out, f"hist_{report.name}_{kind}.tsv"), "w", encoding="utf-8") as fh:
                fh.write(hist.to_text())
    comparison = result.comparison(ev["max_listed_trouble"])
    comparison["run"] = run
    _dump_json(os.path.join(cfg.out, "comparison.json"), comparison)
    with open(os.path.join(cfg.out, "trouble_pairs.tsv"), "w", encoding="utf-8") as fh:
        fh.write("id_a\tid_b\terror_kind\tbaseline_score\tcandidate_score\n")
        for p in result.trouble.pairs:
            i, j = p.pair
            fh.write(f"{gallery.ids[i]}\t{gallery.ids[j]}\t{p.error_kind}\t{p.baseline_score!r}\t{p.rsm_score!r}\n")
    if args.save_scores:
        if result.baseline.mode != "exact":
            raise UsageError("eval: --save-scores needs exact mode (scores are not kept when streaming)")
        for name, sset in (("baseline", result.scores[0]), ("candidate", result.scores[1])):
            write_scores(os.path.join(cfg.out, f"scores_{name}.tsv"), sset)

    b, c = result.baseline, result.candidate
    print(f"pairs: {b.genuine_count} genuine, {b.impostor_count} impostor ({cfg.protocol.kind.value}, {b.mode})", file=out)
    print(f"baseline  ({b.config.base_metric.value}): EER {b.eer * 100:.6f}%", file=out)
    print(f"candidate ({_describe(c.config)}): EER {c.eer * 100:.6f}%", file=out)
    print(f"relative improvement: {result.relative_improvement * 100:.2f}%", file=out)
    print(f"trouble pairs: {len(result.trouble.pairs)} (overlap {result.trouble.baseline_overlap} -> "
          f"{result.trouble.rsm_overlap})", file=out)
    print(f"reports written to {cfg.out}", file=out)


def _describe(config):
    if not config.use_rsm:
        return config.base_metric.value
    return f"rsm/{config.base_metric.value}, M={config.m_refs}, alpha={config.alpha:g}"


def _cmd_hist(args, out):
    scores = read_scores(args.scores)
    if args.range is not None:
        lo, hi = args.range
    else:
        values = np.concatenate([scores.genuine, scores.impostor])
        if values.size == 0:
            raise UsageError("hist: score file is empty")
        lo, hi = 0.0, max(1.0, float(values.max()))
    os.makedirs(args.out, exist_ok=True)
    for kind, values in (("genuine", scores.genuine), ("impostor", scores.impostor)):
        hist = histogram(values, args.bin_width, (lo, hi), clamp=args.clamp)
        path = os.path.join(args.out, f"hist_{kind}.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(hist.to_text())
        print(f"{kind}: {hist.total} scores in {len(hist.counts)} bins -> {path}", file=out)


def _cmd_bench(args, out):
    if args.backend == "all":
        backends = list(_kernels.AVAILABLE)
    else:
        if args.backend not in _kernels.AVAILABLE:
            raise UsageError(f"bench: backend {args.backend!r} is not available (extension not built)")
        backends = [args.backend]
    if args.n < 40 or args.pairs < 1:
        raise UsageError("bench: need --n >= 40 and --pairs >= 1")
    print(f"default backend: {_kernels.BACKEND_NAME}", file=out)
    results = run_bench(n=args.n, dim=args.dim, bits=args.bits, pairs=args.pairs,
                        m_refs=args.m_refs, repeat=max(1, args.repeat), backends=backends)
    print(format_results(results), file=out)
    if args.tongji:
        seconds, result = tongji_eval(workers=args.workers, m_refs=args.m_refs)
        b, c = result.baseline, result.candidate
        print(f"tongji-scale streamed eval: {b.genuine_count} genuine, {b.impostor_count} impostor "
              f"pairs in {seconds:.1f} s (workers={args.workers})", file=out)
        print(f"  EER hamming {b.eer * 100:.6f}%  rsm {c.eer * 100:.6f}%", file=out)


COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "hist": _cmd_hist,
    "bench": _cmd_bench,
}


def main(argv=None, out=None, err=None):
    """Run the CLI; returns the process exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = _build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except RsmError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {exc.code}: {message}", file=err)
        return 2 if isinstance(exc, UsageError) else 1
    except OSError as exc:
        print(f"error: IOError: {exc.strerror}: {exc.filename}", file=err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
