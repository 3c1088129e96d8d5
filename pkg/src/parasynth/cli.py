"""Command-line driver: spec -> automata -> constraints -> solver -> process -> verification."""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .encoder import EncodingError
from .indexed import parse_spec
from .ltl import SpecError
from .solver import (
    SOLVER_ENV,
    BoundSchedule,
    ExtractionError,
    NoneWithinSchedule,
    SolverError,
    default_solver_cmd,
    network_problem,
    ring_problem,
    single_problem,
    synthesize,
    verify_network,
    verify_ring,
)
from .topology import TopologyError, k_topology, load_graph

EXIT_OK, EXIT_ERROR, EXIT_NONE = 0, 1, 2
MODES = ("ring", "network", "single")
FORMATS = ("dot", "json", "both")


@dataclass
class JobConfig:
    spec: Path
    mode: str = "ring"
    graph: str | None = None
    cutoff: int | None = None
    bounds: str | None = None
    solver: str | None = None
    out: Path | None = None
    emit_smt: bool = False
    verify: bool = True
    symmetry_reduce: bool = False
    format: str = "both"
    timeout: float | None = None
    max_local: int = 4

    def __post_init__(self):
        self.spec = Path(self.spec)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {', '.join(FORMATS)}")
        if self.mode == "network" and not self.graph:
            raise ValueError("network mode needs --graph")
        if self.mode != "network" and self.graph:
            raise ValueError("--graph is only meaningful in network mode")
        if self.mode != "network" and self.symmetry_reduce:
            raise ValueError("--symmetry-reduce is only meaningful in network mode")
        if self.cutoff is not None and self.mode != "ring":
            raise ValueError("--cutoff is only meaningful in ring mode")
        if self.cutoff is not None and self.cutoff < 2:
            raise ValueError("ring size must be at least 2")

    @property
    def out_dir(self) -> Path:
        return self.out if self.out is not None else Path("out") / self.spec.stem


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="parasynth",
        description="Synthesize one process implementation for token rings or token-passing networks.",
    )
    p.add_argument("--spec", required=True, type=Path, help="indexed LTL specification file")
    p.add_argument("--mode", choices=MODES, default="ring")
    p.add_argument("--graph", help="network graph: file, ring:N or prio-ring:N:F:T")
    p.add_argument("--cutoff", type=int, help="ring size to synthesize for (default: the cutoff of the input formula)")
    p.add_argument("--bounds", help="bound schedule 'l1,g1;l2,g2;...'")
    p.add_argument("--max-local", type=int, default=4, help="largest local bound of the default schedule")
    p.add_argument("--solver", help=f"solver command (default: ${SOLVER_ENV} or 'z3 -in')")
    p.add_argument("--out", type=Path, help="output directory (default: out/<spec name>)")
    p.add_argument("--emit-smt", action="store_true", help="keep every attempted SMT-LIB2 script")
    p.add_argument("--no-verify", dest="verify", action="store_false", help="skip model checking")
    p.add_argument("--symmetry-reduce", action="store_true", help="one topology block per symmetry orbit")
    p.add_argument("--format", choices=FORMATS, default="both", help="process output format")
    p.add_argument("--timeout", type=float, help="solver timeout per attempt in seconds")
    p.add_argument("--version", action="version", version=f"parasynth {__version__}")
    return p


def config_from_args(argv: Sequence[str] | None = None) -> JobConfig:
    a = build_parser().parse_args(argv)
    return JobConfig(
        spec=a.spec, mode=a.mode, graph=a.graph, cutoff=a.cutoff, bounds=a.bounds, solver=a.solver,
        out=a.out, emit_smt=a.emit_smt, verify=a.verify, symmetry_reduce=a.symmetry_reduce,
        format=a.format, timeout=a.timeout, max_local=a.max_local,
    )


def _schedule(cfg: JobConfig, problem) -> BoundSchedule:
    if cfg.bounds:
        return BoundSchedule.parse(cfg.bounds)
    if problem.uses_global_bound:
        return BoundSchedule.default(problem.n, cfg.max_local)
    return BoundSchedule.local_only(cfg.max_local)


def run(cfg: JobConfig, log=print) -> int:
    """Run one synthesis job; returns the process exit status."""
    start = time.perf_counter()
    spec, iface = parse_spec(cfg.spec.read_text())
    iface.check(spec)
    report: dict = {"spec": str(cfg.spec), "mode": cfg.mode, "solver": cfg.solver or default_solver_cmd()}
    graph = None
    if cfg.mode == "ring":
        problem = ring_problem(spec, iface, cfg.cutoff)
        report["cutoff_class"] = problem.cutoff.cls
        report["cutoff"] = problem.cutoff.cutoff
        report["ring_size"] = problem.n
        log(f"{problem.cutoff}; synthesizing for a ring of {problem.n}")
    elif cfg.mode == "single":
        problem = single_problem(spec, iface)
        report["cutoff_class"] = problem.cutoff.cls
        report["cutoff"] = problem.cutoff.cutoff
        log(f"{problem.cutoff}; synthesizing one process under the token assumption")
    else:
        graph = load_graph(cfg.graph).validate()
        problem = network_problem(spec, iface, graph, symmetry_reduce_blocks=cfg.symmetry_reduce)
        k = max(len(p.variables) for p in spec.parts)
        report["graph"] = cfg.graph
        report["topologies"] = len(k_topology(graph, k))
        report["blocks"] = len(problem.blocks)
        log(f"{report['topologies']} connection topologies, {len(problem.blocks)} constraint blocks")
    report["automaton_states"] = [len(u.states) for u in problem.ucws]

    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    schedule = _schedule(cfg, problem)
    result = synthesize(
        problem, schedule, cfg.solver, timeout=cfg.timeout, emit_smt=out / "smt" if cfg.emit_smt else None
    )
    report["attempts"] = [a.to_json() for a in result.attempts]
    for a in result.attempts:
        log(f"  bounds local={a.bound_local} global={a.bound_global}: {a.status} ({a.time:.2f}s)")
    if isinstance(result, NoneWithinSchedule):
        report["status"] = "none-within-schedule"
        report["time"] = round(time.perf_counter() - start, 3)
        _write_json(out / "report.json", report)
        log("no implementation within the bound schedule")
        return EXIT_NONE

    p = result.process
    report["process"] = {"states": len(p.states), "init_token": p.init_token, "init_idle": p.init_idle}
    if cfg.format in ("json", "both"):
        _write_json(out / "process.json", p.to_json())
    if cfg.format in ("dot", "both"):
        (out / "process.dot").write_text(p.to_dot())

    status = "synthesized"
    if cfg.verify:
        if cfg.mode == "network":
            verdicts = verify_network(p, spec, graph)
        else:
            cut = problem.cutoff.cutoff
            verdicts = verify_ring(p, spec, range(2, cut + 3))
        rows = []
        for v in verdicts:
            row = {
                "check": v.label,
                "holds": v.holds,
                "exactly_one_token": v.tokens_ok,
                "unscheduled_invariance": v.invariance_ok,
                "states": v.states,
            }
            if cfg.mode != "network":
                # sizes up to the cutoff are covered by the cutoff theorem, larger ones are extra evidence
                row["beyond_cutoff"] = int(v.label.split("=")[1]) > problem.cutoff.cutoff
            if v.counterexample:
                row["counterexample"] = v.counterexample
            rows.append(row)
            log(f"  verify {v.label}: {'ok' if v.ok else 'FAILED'} ({v.states} states)")
        report["verification"] = rows
        if not all(v.ok for v in verdicts):
            report["status"] = "verification-failed"
            report["time"] = round(time.perf_counter() - start, 3)
            _write_json(out / "report.json", report)
            log("synthesized process failed verification")
            return EXIT_ERROR
        status = "verified"
    else:
        status = "unverified"
    report["status"] = status
    report["time"] = round(time.perf_counter() - start, 3)
    _write_json(out / "report.json", report)
    log(f"{status}: {len(p.states)}-state process written to {out}")
    return EXIT_OK


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(cfg)
    except (SpecError, TopologyError, EncodingError, SolverError, ExtractionError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
