"""SMT-LIB2 HORN emission, external solver runs, and model parsing.

Solvers are run as external processes with the script path as the last
argument.  ``TOPOINV_SOLVER`` overrides the default executable (``z3``) and
``TOPOINV_SCRATCH`` the scratch root; each run gets its own subdirectory.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import sexpr
from .chc import Atom, ChcSystem, Clause, natural_key
from .logic import (
    BOOL,
    INT,
    OPERATORS,
    TRUE,
    DVar,
    Lit,
    LogicError,
    Op,
    check_sorts,
    conj,
    free_vars,
    implies,
    leaves,
    neg,
    substitute,
    to_smt,
)


class SolverError(RuntimeError):
    pass


class ModelError(ValueError):
    pass


def default_solver():
    return os.environ.get("TOPOINV_SOLVER", "z3")


@dataclass
class SolverConfig:
    executable: str = field(default_factory=default_solver)
    args: tuple = ()
    timeout: float = 60.0
    logic: str = "HORN"
    scratch: Optional[str] = None

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("solver timeout must be positive")


@dataclass
class SolverResult:
    verdict: str  # sat | unsat | unknown | timeout | error
    model: Optional[dict] = None  # predicate id -> formula over p0, p1, ...
    raw: str = ""
    seconds: float = 0.0
    model_usable: bool = True
    note: str = ""


def pred_name(r):
    return f"Inv_{r}"


def param(i, sort):
    return DVar(f"p{i}", sort)


# ---------------------------------------------------------------------------
# emission


def _atom_smt(a: Atom):
    if not a.args:
        return pred_name(a.pred)
    return f"({pred_name(a.pred)} {' '.join(v.name for v in a.args)})"


def clause_smt(c: Clause) -> str:
    parts = [_atom_smt(a) for a in c.body]
    if c.constraint != TRUE:
        parts.append(to_smt(c.constraint))
    head = _atom_smt(c.head) if c.head is not None else "false"
    if not parts:
        body = None
    elif len(parts) == 1:
        body = parts[0]
    else:
        body = f"(and {' '.join(parts)})"
    matrix = head if body is None else f"(=> {body} {head})"
    vs = c.variables()
    if not vs:
        return f"(assert {matrix})"
    decl = " ".join(f"({v.name} {v.sort})" for v in vs)
    return f"(assert (forall ({decl}) {matrix}))"


def emit_smtlib(system: ChcSystem) -> str:
    lines = ["(set-logic HORN)"]
    for r in sorted(system.predicates):
        sorts = " ".join(system.predicates[r])
        lines.append(f"(declare-fun {pred_name(r)} ({sorts}) Bool)")
    for c in system.clauses:
        for a in c.body + ((c.head,) if c.head else ()):
            if a.pred not in system.predicates:
                raise LogicError(f"clause uses undeclared predicate {pred_name(a.pred)}")
            if tuple(v.sort for v in a.args) != system.predicates[a.pred]:
                raise LogicError(f"arity/sort mismatch for {pred_name(a.pred)}")
        lines.append(clause_smt(c))
    lines.append("(check-sat)")
    if system.predicates:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running


def _scratch_dir(cfg):
    root = cfg.scratch or os.environ.get("TOPOINV_SCRATCH") or None
    if root:
        Path(root).mkdir(parents=True, exist_ok=True)
    return tempfile.mkdtemp(prefix="topoinv-", dir=root)


def _run(script: str, cfg: SolverConfig, name="query.smt2"):
    exe = shutil.which(cfg.executable) or (cfg.executable if Path(cfg.executable).exists() else None)
    if exe is None:
        raise SolverError(f"solver executable {cfg.executable!r} not found")
    d = _scratch_dir(cfg)
    path = Path(d) / name
    path.write_text(script, encoding="utf-8")
    t0 = time.monotonic()
    try:
        proc = subprocess.run([exe, *cfg.args, str(path)], capture_output=True, text=True,
                              timeout=cfg.timeout)
        out, timed_out, code = proc.stdout + proc.stderr, False, proc.returncode
    except subprocess.TimeoutExpired as e:
        out = (e.stdout or b"").decode() if isinstance(e.stdout, bytes) else (e.stdout or "")
        timed_out, code = True, None
    finally:
        shutil.rmtree(d, ignore_errors=True)
    return out, timed_out, code, time.monotonic() - t0


_VERDICT = re.compile(r"^\s*(sat|unsat|unknown|timeout)\s*$", re.M)


def run_solver(script: str, cfg: Optional[SolverConfig] = None, predicates=None) -> SolverResult:
    """Run the solver on ``script``; parse a model on ``sat`` when ``predicates``
    (``{id: sorts}``) is given."""
    cfg = cfg or SolverConfig()
    out, timed_out, code, secs = _run(script, cfg)
    if timed_out:
        return SolverResult("timeout", raw=out, seconds=secs)
    m = _VERDICT.search(out)
    if m is None:
        return SolverResult("error", raw=out, seconds=secs, note=f"exit code {code}")
    res = SolverResult(m.group(1), raw=out, seconds=secs)
    if res.verdict == "sat" and predicates is not None:
        try:
            res.model = parse_model(out, predicates)
        except ModelError as e:
            res.model_usable = False
            res.note = str(e)
    return res


# ---------------------------------------------------------------------------
# model parsing


def _forms_after_verdict(transcript):
    m = _VERDICT.search(transcript)
    text = transcript[m.end():] if m else transcript
    try:
        return sexpr.parse(text)
    except sexpr.SExprError as e:
        raise ModelError(f"unparseable model: {e}") from None


def _definitions(forms):
    out = {}

    def walk(x):
        if isinstance(x, list) and x:
            if x[0] == "define-fun" and len(x) == 5:
                out[str(x[1])] = x
            elif x[0] in ("define-fun-rec", "define-funs-rec", "declare-fun"):
                raise ModelError("model uses recursive or auxiliary definitions (not a data-theory formula)")
            else:
                for y in x:
                    walk(y)

    for f in forms:
        walk(f)
    return out


_SORT = {"Int": INT, "Bool": BOOL}


def parse_model(transcript: str, predicates: dict) -> dict:
    """``{id: formula over p0..}`` for every predicate in ``predicates``."""
    defs = _definitions(_forms_after_verdict(transcript))
    model = {}
    for r, sorts in predicates.items():
        name = pred_name(r)
        if name not in defs:
            raise ModelError(f"incomplete model: no definition for {name}")
        _, _, params, ret, body = defs[name]
        if str(ret) != "Bool" or len(params) != len(sorts):
            raise ModelError(f"definition of {name} has the wrong signature")
        env = {}
        for i, (p, s) in enumerate(zip(params, sorts)):
            if _SORT.get(str(p[1])) != s:
                raise ModelError(f"{name}: parameter {i} has sort {p[1]}, expected {s}")
            env[str(p[0])] = param(i, s)
        phi = _to_formula(body, env)
        try:
            if check_sorts(phi) != BOOL:
                raise ModelError(f"{name}: body is not boolean")
        except LogicError as e:
            raise ModelError(f"{name}: {e}") from None
        model[r] = phi
    return model


def _to_formula(x, env):
    if isinstance(x, bool):
        return Lit(x)
    if isinstance(x, int):
        return Lit(x)
    if isinstance(x, sexpr.Symbol):
        s = str(x)
        if s == "true":
            return Lit(True)
        if s == "false":
            return Lit(False)
        if s in env:
            return env[s]
        raise ModelError(f"unknown symbol {s!r} in model")
    if not (isinstance(x, list) and x):
        raise ModelError(f"unexpected model syntax {sexpr.dumps(x)}")
    op = str(x[0]) if isinstance(x[0], sexpr.Symbol) else None
    if op == "let":
        env2 = dict(env)
        for b in x[1]:
            env2[str(b[0])] = _to_formula(b[1], env)
        return _to_formula(x[2], env2)
    if op == "-" and len(x) == 2 and isinstance(x[1], int):
        return Lit(-x[1])
    if op not in OPERATORS:
        raise ModelError(f"unsupported model construct {op!r}")
    return Op(op, tuple(_to_formula(a, env) for a in x[1:]))


def apply_model(model: dict, atom: Atom):
    """The model's formula for ``atom.pred`` instantiated at ``atom.args``."""
    phi = model[atom.pred]
    return substitute(phi, {param(i, v.sort): v for i, v in enumerate(atom.args)})


# ---------------------------------------------------------------------------
# validity queries


@dataclass
class Validity:
    status: str  # valid | invalid | undetermined
    countermodel: Optional[dict] = None  # variable name -> value
    note: str = ""


def check_valid_batch(formulas, cfg: Optional[SolverConfig] = None, chunk=200) -> list:
    """Decide validity of each pure formula with one solver process per chunk."""
    cfg = cfg or SolverConfig()
    formulas = list(formulas)
    results = []
    for start in range(0, len(formulas), chunk):
        results.extend(_batch(formulas[start:start + chunk], cfg, start))
    return results


def _batch(formulas, cfg, offset):
    lines = []
    per_query_ms = int(cfg.timeout * 1000)
    for i, phi in enumerate(formulas):
        vs = sorted(free_vars(phi), key=lambda v: natural_key(v.name))
        lines.append("(push 1)")
        lines.append(f"(set-option :timeout {per_query_ms})")
        lines.extend(f"(declare-const {v.name} {v.sort})" for v in vs)
        lines.append(f"(assert {to_smt(neg(phi))})")
        lines.append("(check-sat)")
        if vs:
            lines.append(f"(get-value ({' '.join(v.name for v in vs)}))")
        lines.append(f'(echo "@@{offset + i}")')
        lines.append("(pop 1)")
    script = "\n".join(lines) + "\n"
    batch_cfg = SolverConfig(cfg.executable, tuple(a for a in cfg.args if "horn" not in a.lower()),
                             cfg.timeout * max(1, len(formulas)) + 5, "ALL", cfg.scratch)
    out, timed_out, _, _ = _run(script, batch_cfg)
    chunks = {}
    cur = []
    for line in out.splitlines():
        m = re.match(r"^@@(\d+)\s*$", line.strip())
        if m:
            chunks[int(m.group(1))] = "\n".join(cur)
            cur = []
        else:
            cur.append(line)
    results = []
    for i in range(len(formulas)):
        text = chunks.get(offset + i)
        if text is None:
            results.append(Validity("undetermined", note="timeout" if timed_out else "no answer"))
            continue
        v = _VERDICT.search(text)
        if v is None:
            results.append(Validity("undetermined", note=text.strip()[:200]))
        elif v.group(1) == "unsat":
            results.append(Validity("valid"))
        elif v.group(1) == "sat":
            results.append(Validity("invalid", countermodel=_values(text[v.end():])))
        else:
            results.append(Validity("undetermined", note=v.group(1)))
    return results


def _values(text):
    out = {}
    try:
        forms = sexpr.parse(text)
    except sexpr.SExprError:
        return out
    for f in forms:
        if isinstance(f, list):
            for pair in f:
                if isinstance(pair, list) and len(pair) == 2:
                    try:
                        out[str(pair[0])] = _literal(pair[1])
                    except ModelError:
                        pass
    return out


def _literal(x):
    if isinstance(x, int) and not isinstance(x, bool):
        return x
    if x == "true":
        return True
    if x == "false":
        return False
    if isinstance(x, list) and len(x) == 2 and x[0] == "-" and isinstance(x[1], int):
        return -x[1]
    raise ModelError(f"not a literal: {sexpr.dumps(x)}")


def clause_validity_formula(c: Clause, model: dict):
    body = [apply_model(model, a) for a in c.body]
    head = apply_model(model, c.head) if c.head is not None else Lit(False)
    return implies(conj(body + [c.constraint]), head)


def recheck_model(system: ChcSystem, model: dict, cfg: Optional[SolverConfig] = None) -> list:
    """Validity of every clause under ``model``; returns the failing clauses
    as ``(clause, Validity)`` pairs (empty list = model passes the gate)."""
    formulas = [clause_validity_formula(c, model) for c in system.clauses]
    res = check_valid_batch(formulas, cfg)
    return [(c, v) for c, v in zip(system.clauses, res) if v.status != "valid"]


def solve(system: ChcSystem, cfg: Optional[SolverConfig] = None, recheck=True) -> SolverResult:
    """Emit, solve, parse the model and (optionally) re-validate it."""
    cfg = cfg or SolverConfig()
    res = run_solver(emit_smtlib(system), cfg, system.predicates)
    if res.verdict == "sat" and res.model is not None and recheck:
        bad = recheck_model(system, res.model, cfg)
        if bad:
            res.model_usable = False
            res.note = f"model failed re-validation on {len(bad)} clause(s)"
    return res
