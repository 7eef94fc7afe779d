import csv
import io
import stat
import subprocess
import sys

import pytest

from conftest import needs_solver
from topoinv.cli import main
from topoinv.invariant import export_invariant, import_invariant
from topoinv.logic import TRUE
from topoinv.suite import resolve_spec


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def fake_solver(tmp_path, body):
    path = tmp_path / "fake-solver"
    path.write_text(f"#!{sys.executable}\nimport time\n{body}\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_types_lists_one_row_per_type(capsys):
    code, out, _ = run(capsys, "types", "--family", "line", "-k", "1")
    assert code == 0
    rows = [line for line in out.splitlines() if line.startswith("T")]
    assert len(rows) == 6


def test_types_rejects_bad_width(capsys):
    code, _, err = run(capsys, "types", "--family", "line", "-k", "0")
    assert code == 2 and "-k" in err


def test_encode_writes_script_and_dump(capsys, tmp_path):
    out, dump = tmp_path / "q.smt2", tmp_path / "q.txt"
    code, _, _ = run(capsys, "encode", "ring_swap", "-o", str(out), "--dump", str(dump))
    assert code == 0
    assert out.read_text().startswith("(set-logic HORN)")
    assert dump.read_text().startswith("; k=1 options=baseline size=2/8")


def test_conflicting_options_are_usage_errors(capsys):
    code, _, err = run(capsys, "encode", "ring_swap", "--baseline", "--dpg")
    assert code == 2 and "--baseline" in err


def test_missing_spec_is_usage_error(capsys):
    code, _, _ = run(capsys, "encode", "no_such_benchmark")
    assert code == 2


def test_bad_spec_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.topo"
    bad.write_text("(family star)\n(fields (res (lock bool)))\n(kind (2 0) (init (mu nu nope)))\n")
    code, _, err = run(capsys, "encode", str(bad), "-k", "1")
    assert code == 2 and "3:" in err and "nope" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["simulate", "ring_token"])
    assert e.value.code == 2


def test_timeout_exit_code(capsys, tmp_path):
    exe = fake_solver(tmp_path, "time.sleep(30)")
    code, out, _ = run(capsys, "solve", "ring_swap", "--solver", exe, "--timeout", "1")
    assert code == 30 and out.startswith("timeout")


def test_missing_solver_exit_code(capsys):
    code, _, err = run(capsys, "solve", "ring_swap", "--solver", "definitely-not-a-solver")
    assert code == 2 and "not found" in err


def test_simulate_safe_and_unsafe(capsys):
    code, out, _ = run(capsys, "simulate", "ring_token", "-n", "4")
    assert code == 0 and out.startswith("safe")
    code, out, _ = run(capsys, "simulate", "ring_token_bug", "-n", "3")
    assert code == 10 and "trace" in out
    code, out, _ = run(capsys, "simulate", "ring_token", "-n", "5", "--max-states", "2")
    assert code == 20


@needs_solver
def test_solve_then_check(capsys, tmp_path):
    inv = tmp_path / "inv.sexpr"
    text = tmp_path / "inv.txt"
    code, out, _ = run(capsys, "solve", "ring_swap", "-o", str(inv), "--text", str(text))
    assert code == 0 and out.startswith("sat\t2/8")
    assert inv.read_text().startswith("(invariant (family ring) (width 1)")
    assert "Ashcroft invariant" in text.read_text()
    code, out, _ = run(capsys, "check", "ring_swap", str(inv))
    assert code == 0 and out.startswith("invariant")


@needs_solver
def test_solve_dpg_then_check_uses_dpg_mode(capsys, tmp_path):
    inv = tmp_path / "inv.sexpr"
    code, _, _ = run(capsys, "solve", "ring_token", "--opn", "--dpg", "--sym", "-o", str(inv))
    assert code == 0
    code, out, _ = run(capsys, "check", "ring_token", str(inv))
    assert code == 0 and "mode dpg" in out


@needs_solver
def test_check_rejects_a_wrong_invariant(capsys, tmp_path):
    inv = tmp_path / "inv.sexpr"
    assert run(capsys, "solve", "ring_swap", "-o", str(inv))[0] == 0
    loaded = import_invariant(inv.read_text(), resolve_spec("ring_swap"))
    for e in loaded.entries.values():
        e.phi = TRUE
    bad = tmp_path / "weak.sexpr"
    bad.write_text(export_invariant(loaded))
    code, out, _ = run(capsys, "check", "ring_swap", str(bad))
    assert code == 10 and out.startswith("not-invariant")


@needs_solver
def test_unsat_exit_code(capsys):
    code, out, _ = run(capsys, "solve", "ring_swap_bug")
    assert code == 10 and out.startswith("unsat")


@needs_solver
def test_bench_csv(capsys):
    code, out, _ = run(capsys, "bench", "--only", "ring_swap", "ring_swap_bug", "--encodings", "baseline", "dpg")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [(r["benchmark"], r["encoding"]) for r in rows] == [
        ("ring_swap", "baseline"), ("ring_swap", "dpg"), ("ring_swap_bug", "baseline"), ("ring_swap_bug", "dpg")]
    assert all(r["verdict"] == r["expected"] for r in rows)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "topoinv.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve" in res.stdout
