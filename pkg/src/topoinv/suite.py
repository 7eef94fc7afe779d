"""The bundled benchmark programs."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .program import ProgramSpec, load_spec, parse_spec


@dataclass(frozen=True)
class Benchmark:
    name: str
    k: int
    expected: str  # sat | unsat
    note: str = ""


BENCHMARKS = (
    Benchmark("ring_swap", 1, "sat", "value swap on a ring"),
    Benchmark("ring_swap_bug", 1, "unsat"),
    Benchmark("simple_pipeline", 1, "sat", "pipeline on a line"),
    Benchmark("simple_pipeline_bug", 1, "unsat"),
    Benchmark("ring_token", 2, "sat", "boolean token passing"),
    Benchmark("ring_token_bug", 2, "unsat"),
    Benchmark("star_mutex", 2, "sat", "lock-based mutual exclusion on a star"),
    Benchmark("star_mutex_bug", 2, "unsat"),
    Benchmark("star_lock", 2, "sat", "the running star example"),
)


def benchmark_text(name) -> str:
    return resources.files("topoinv").joinpath("benchmarks", f"{name}.topo").read_text(encoding="utf-8")


def resolve_spec(arg) -> ProgramSpec:
    """Load a spec from a path, or from the bundled suite by name."""
    path = Path(arg)
    if path.exists():
        return load_spec(path)
    name = path.stem if path.suffix == ".topo" else str(arg)
    try:
        text = benchmark_text(name)
    except FileNotFoundError:
        raise FileNotFoundError(f"no spec file or bundled benchmark named {arg!r}") from None
    return parse_spec(text, f"<bundled {name}>")
