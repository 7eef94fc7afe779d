"""Run the bundled suite under every encoding and print a table.

    python scripts/bench.py [--timeout 120] [--only ring_swap ...] [--csv out.csv]
"""

import argparse
import csv
import sys
import time

from topoinv.backend import SolverConfig, solve
from topoinv.chc import EncodingError, Options, encode_family
from topoinv.suite import BENCHMARKS, resolve_spec

ENCODINGS = {
    "baseline": Options(),
    "opn": Options(opn=True),
    "dpg": Options(dpg=True),
    "opn+dpg+sym": Options(opn=True, dpg=True, sym=True),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--timeout", type=float, default=120.0)
    ap.add_argument("--only", nargs="+")
    ap.add_argument("--csv")
    args = ap.parse_args()
    cfg = SolverConfig(timeout=args.timeout)
    rows = []
    for b in BENCHMARKS:
        if args.only and b.name not in args.only:
            continue
        sp = resolve_spec(b.name)
        for label, opts in ENCODINGS.items():
            t0 = time.monotonic()
            try:
                system = encode_family(sp, b.k, opts)
            except EncodingError as e:
                rows.append((b.name, b.k, label, "-", "-", "-", f"encoding error: {e}", b.expected))
                continue
            gen = time.monotonic() - t0
            res = solve(system, cfg)
            verdict = res.verdict if res.model_usable else f"{res.verdict} (model unusable)"
            rows.append((b.name, b.k, label, system.stats, f"{gen:.2f}", f"{res.seconds:.2f}", verdict, b.expected))
            print("\t".join(map(str, rows[-1])), file=sys.stderr, flush=True)
    header = ("benchmark", "k", "encoding", "size", "gen_s", "solve_s", "verdict", "expected")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            csv.writer(f).writerows([header, *rows])
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    for r in [header, *rows]:
        print("  ".join(str(x).ljust(w) for x, w in zip(r, widths)))
    return 0 if all(r[6] == r[7] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
