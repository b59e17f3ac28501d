"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_backends.py [--n 2000] [--pairs 200000] [--tongji]

Prints pairs/second per path and backend, the compiled-over-fallback
speedup, and whether both backends produced bit-identical scores.
"""

import argparse
import sys

from rsmatch import _kernels
from rsmatch.bench import format_results, run_bench, tongji_eval


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--bits", type=int, default=128)
    p.add_argument("--pairs", type=int, default=200_000)
    p.add_argument("--m-refs", type=int, default=30)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--tongji", action="store_true", help="also time the full streamed evaluation")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)

    print(f"backends available: {', '.join(_kernels.AVAILABLE)} (default {_kernels.BACKEND_NAME})")
    results = run_bench(n=args.n, dim=args.dim, bits=args.bits, pairs=args.pairs,
                        m_refs=args.m_refs, repeat=args.repeat)
    print(format_results(results))

    by_path = {}
    for r in results:
        by_path.setdefault(r["path"], {})[r["backend"]] = r["seconds"]
    if "compiled" in _kernels.AVAILABLE:
        print()
        for path, secs in by_path.items():
            print(f"{path:<16}compiled speedup x{secs['fallback'] / secs['compiled']:.1f}")

    if args.tongji:
        seconds, result = tongji_eval(workers=args.workers, m_refs=args.m_refs)
        print(f"\nstreamed eval: {result.baseline.impostor_count} impostor pairs in {seconds:.1f} s "
              f"(workers={args.workers}, backend {_kernels.BACKEND_NAME})")
    return 0 if all(r["matches_reference"] for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
