"""Command-line front end.

Exit codes: 0 invariant/safe/sat, 10 unsat or not-invariant or unsafe,
20 unknown/undetermined, 30 timeout, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

from . import sexpr
from .backend import SolverConfig, SolverError, emit_smtlib, solve
from .chc import EncodingError, Options, encode_family
from .explicit import explicit_reach
from .families import FAMILY_NAMES, family
from .invariant import assemble_invariant, check_family, export_invariant, import_invariant
from .logic import LogicError
from .program import SpecError
from .suite import BENCHMARKS, resolve_spec
from .symmetry import enumerate_qf_types

EXIT_OK, EXIT_UNSAT, EXIT_UNKNOWN, EXIT_TIMEOUT, EXIT_USAGE = 0, 10, 20, 30, 2

VERDICT_EXIT = {"sat": EXIT_OK, "unsat": EXIT_UNSAT, "unknown": EXIT_UNKNOWN, "error": EXIT_UNKNOWN,
                "timeout": EXIT_TIMEOUT}


class UsageError(Exception):
    pass


def _options(ns) -> Options:
    chosen = ns.opn or ns.dpg or ns.sym
    if ns.baseline and chosen:
        raise UsageError("--baseline cannot be combined with --opn/--dpg/--sym")
    return Options(opn=ns.opn, dpg=ns.dpg, sym=ns.sym, simplify=not ns.raw)


def _width(ns, spec):
    k = ns.k if ns.k is not None else spec.width
    if k is None:
        raise UsageError("no width given: pass -k or declare (width k) in the spec")
    if k < 1:
        raise UsageError("k must be >= 1")
    return k


def _solver(ns) -> SolverConfig:
    kw = {}
    if getattr(ns, "solver", None):
        kw["executable"] = ns.solver
    if getattr(ns, "timeout", None) is not None:
        kw["timeout"] = ns.timeout
    if getattr(ns, "scratch", None):
        kw["scratch"] = ns.scratch
    try:
        return SolverConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_types(ns) -> int:
    if ns.family:
        fam = family(ns.family)
    else:
        if not ns.spec:
            raise UsageError("types needs a spec or --family")
        fam = resolve_spec(ns.spec).family
    if ns.k is None or ns.k < 1:
        raise UsageError("types needs -k >= 1")
    indices = ns.indices
    table = enumerate_qf_types(fam, ns.k, indices)
    print(f"{len(table)} {ns.k}-types of {fam.name} over instances {indices or fam.bounds(ns.k)}")
    for T in table:
        terms = ", ".join(map(str, T.rep_terms))
        print(f"T{T.id}\tn={T.size}\tU=({terms})\t{T.describe()}")
        if ns.alpha:
            print(f"\talpha: {T.alpha}")
    return EXIT_OK


def cmd_encode(ns) -> int:
    spec = resolve_spec(ns.spec)
    k = _width(ns, spec)
    opts = _options(ns)
    t0 = time.monotonic()
    system = encode_family(spec, k, opts)
    script = emit_smtlib(system)
    gen = time.monotonic() - t0
    if ns.out:
        _write(ns.out, script)
    if ns.dump:
        _write(ns.dump, system.dump())
    print(f"{system.stats}\t{opts.label}\tk={k}\t{gen:.3f}s", file=sys.stderr if not ns.out else sys.stdout)
    if not ns.out:
        sys.stdout.write(script)
    return EXIT_OK


def cmd_solve(ns) -> int:
    spec = resolve_spec(ns.spec)
    k = _width(ns, spec)
    opts = _options(ns)
    cfg = _solver(ns)
    t0 = time.monotonic()
    system = encode_family(spec, k, opts)
    gen = time.monotonic() - t0
    res = solve(system, cfg, recheck=not ns.no_recheck)
    print(f"{res.verdict}\t{system.stats}\t{opts.label}\tgen {gen:.3f}s\tsolve {res.seconds:.3f}s")
    if res.verdict != "sat":
        if res.verdict == "error":
            print(res.raw.strip()[:2000], file=sys.stderr)
        return VERDICT_EXIT[res.verdict]
    if res.model is None or not res.model_usable:
        print(f"model unusable: {res.note}", file=sys.stderr)
        return EXIT_UNKNOWN
    inv = assemble_invariant(system, res.model, spec)
    _write(ns.out or "-", export_invariant(inv))
    if ns.text:
        _write(ns.text, inv.render())
    return EXIT_OK


def cmd_check(ns) -> int:
    spec = resolve_spec(ns.spec)
    inv = import_invariant(Path(ns.invariant).read_text(encoding="utf-8"), spec)
    if ns.k is not None and ns.k != inv.k:
        raise UsageError(f"-k {ns.k} does not match the invariant's width {inv.k}")
    mode = ns.mode or ("dpg" if "dpg" in inv.options.split("+") else "closure")
    rep = check_family(inv, spec, mode, ns.indices, _solver(ns))
    print(rep.summary())
    for f in rep.failures:
        if f.countermodel:
            print(f"  countermodel for {f.triple}: {f.countermodel}")
    return {"invariant": EXIT_OK, "not-invariant": EXIT_UNSAT}.get(rep.verdict, EXIT_UNKNOWN)


def cmd_simulate(ns) -> int:
    spec = resolve_spec(ns.spec)
    P = spec.instance(ns.n)
    res = explicit_reach(P, max_states=ns.max_states, depth=ns.depth)
    print(f"{res.status}\t{res.states} states\t{spec.family.name}({ns.n})")
    if res.status == "unsafe":
        names = ", ".join(P.structure.names[u] for u in res.error_tuple)
        print(f"error at ({names}); trace:")
        for step, (actor, st) in enumerate(res.trace):
            print(f"  {step}: {actor or 'init'}\t{_fmt_state(st)}")
        return EXIT_UNSAT
    return EXIT_OK if res.status == "safe" else EXIT_UNKNOWN


def _fmt_state(st):
    return " ".join(f"{u}:{','.join(f'{f}={int(v)}' for f, v in fs.items())}" for u, fs in st.items() if fs)


BENCH_ENCODINGS = {
    "baseline": Options(),
    "opn": Options(opn=True),
    "dpg": Options(dpg=True),
    "opn+dpg+sym": Options(opn=True, dpg=True, sym=True),
}


def cmd_bench(ns) -> int:
    cfg = _solver(ns)
    names = ns.only or [b.name for b in BENCHMARKS]
    encs = ns.encodings or list(BENCH_ENCODINGS)
    out = open(ns.out, "w", newline="") if ns.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["benchmark", "k", "encoding", "size", "predicates", "clauses", "gen_s", "solve_s",
                "verdict", "expected"])
    expected = {b.name: b for b in BENCHMARKS}
    worst = EXIT_OK
    for name in names:
        b = expected.get(name)
        spec = resolve_spec(name)
        k = ns.k or (b.k if b else spec.width)
        for enc in encs:
            t0 = time.monotonic()
            try:
                system = encode_family(spec, k, BENCH_ENCODINGS[enc])
            except EncodingError as e:
                w.writerow([name, k, enc, "", "", "", "", "", f"encoding-error: {e}", b.expected if b else ""])
                continue
            gen = time.monotonic() - t0
            res = solve(system, cfg, recheck=not ns.no_recheck)
            w.writerow([name, k, enc, system.stats, len(system.predicates), len(system.clauses),
                        f"{gen:.3f}", f"{res.seconds:.3f}", res.verdict, b.expected if b else ""])
            out.flush()
            if b and res.verdict != b.expected:
                worst = max(worst, VERDICT_EXIT.get(res.verdict, EXIT_UNKNOWN))
    if ns.out:
        out.close()
    return worst


# ---------------------------------------------------------------------------
# argument parsing


def _indices(text):
    """``3..5`` or ``3,4,7``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topoinv", description="Ashcroft invariants for parameterized programs "
                                "over topologies via CHC encodings.")
    sub = p.add_subparsers(dest="command", required=True)

    def spec_arg(sp, required=True):
        sp.add_argument("spec", nargs=None if required else "?",
                        help="spec file (.topo) or the name of a bundled benchmark")
        sp.add_argument("-k", type=int, help="invariant width (default: the spec's (width k))")

    def opt_flags(sp):
        g = sp.add_argument_group("encoding options")
        g.add_argument("--baseline", action="store_true", help="plain encoding (the default)")
        g.add_argument("--opn", action="store_true", help="one predicate per neighbourhood")
        g.add_argument("--dpg", action="store_true", help="distinct process generators")
        g.add_argument("--sym", action="store_true", help="symmetry reduction of body atoms")
        g.add_argument("--raw", action="store_true", help="skip clause simplification and dedupe")

    def solver_flags(sp):
        g = sp.add_argument_group("solver")
        g.add_argument("--solver", help="solver executable (default $TOPOINV_SOLVER or z3)")
        g.add_argument("--timeout", type=float, help="seconds per solver call (default 60)")
        g.add_argument("--scratch", help="scratch root (default $TOPOINV_SCRATCH or the system temp dir)")

    sp = sub.add_parser("types", help="list the quantifier-free k-types of a family")
    spec_arg(sp, required=False)
    sp.add_argument("--family", choices=FAMILY_NAMES)
    sp.add_argument("--indices", type=_indices, help="instance indices, e.g. 3..7")
    sp.add_argument("--alpha", action="store_true", help="print defining formulas")
    sp.set_defaults(func=cmd_types)

    sp = sub.add_parser("encode", help="emit the SMT-LIB2 HORN script")
    spec_arg(sp)
    opt_flags(sp)
    sp.add_argument("-o", "--out", help="script path (default stdout)")
    sp.add_argument("--dump", help="also write a readable clause listing here")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("solve", help="encode, solve, recheck and export the invariant")
    spec_arg(sp)
    opt_flags(sp)
    solver_flags(sp)
    sp.add_argument("-o", "--out", help="invariant S-expression path (default stdout)")
    sp.add_argument("--text", help="also write the readable invariant here")
    sp.add_argument("--no-recheck", action="store_true", help="skip the model re-validation gate")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("check", help="validate an exported invariant on the basis")
    spec_arg(sp)
    sp.add_argument("invariant", help="invariant S-expression file")
    sp.add_argument("--mode", choices=("closure", "dpg", "instances"),
                    help="basis (default: dpg for DPG invariants, else closure)")
    sp.add_argument("--indices", type=_indices, help="instances for --mode instances, e.g. 3..5")
    solver_flags(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="explicit-state search on one boolean instance")
    sp.add_argument("spec")
    sp.add_argument("-n", type=int, required=True, help="instance index")
    sp.add_argument("--depth", type=int, help="maximum number of steps")
    sp.add_argument("--max-states", type=int, help="state budget")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="run the bundled suite and print a CSV report")
    sp.add_argument("--only", nargs="+", help="benchmark names")
    sp.add_argument("--encodings", nargs="+", choices=list(BENCH_ENCODINGS))
    sp.add_argument("-k", type=int, help="override every benchmark's width")
    sp.add_argument("-o", "--out", help="CSV path (default stdout)")
    sp.add_argument("--no-recheck", action="store_true")
    solver_flags(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except UsageError as e:
        print(f"topoinv: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, sexpr.SExprError, FileNotFoundError) as e:
        print(f"topoinv: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"topoinv: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (EncodingError, LogicError) as e:
        print(f"topoinv: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the exit-time flush
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
