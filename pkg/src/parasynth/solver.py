"""Solver driver, model extraction and the increasing-bounds loop.

The solver is an external executable speaking SMT-LIB2 on stdin/stdout
(``z3 -in`` by default, overridable through ``PARASYNTH_SOLVER``).  Models
are read from ``get-value`` responses over explicitly enumerated points, so
no solver-specific model syntax is parsed.
"""
from __future__ import annotations

import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .automaton import ExclusiveGroup, Ucw, ltl_to_ucw
from .encoder import (
    HUB_GOT,
    HUB_SEND,
    Encoding,
    block_successor,
    encode_network,
    encode_ring,
    encode_single_process,
    ring_step_bits,
)
from .indexed import (
    SCHED,
    CutoffClass,
    IndexedSpec,
    ProcessInterface,
    augment_fairness,
    build_token_assumption,
    classify,
    fair_scheduling,
    instantiate,
    sched,
    signal,
    site_obligation,
    token_release,
)
from .ltl import And, Formula, Globally, Implies, SpecError, WeakUntil, conj, substitute
from .lts import (
    GlobalLts,
    Holds,
    LassoCounterexample,
    ProcessLts,
    compose_network,
    compose_ring,
    exactly_one_token,
    model_check,
    unscheduled_invariance_violations,
)
from .smt import ModelError, SmtModel, SmtScript, evaluate, parse_sexps, sexp_value
from .topology import (
    NetworkGraph,
    is_symmetric,
    k_topology,
    rewrite_quantifiers,
    symmetry_reduce,
)

SOLVER_ENV = "PARASYNTH_SOLVER"
DEFAULT_SOLVER = "z3 -in"

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"


class SolverError(RuntimeError):
    pass


class ExtractionError(RuntimeError):
    """The model read back from the solver violates the script it answered."""


@dataclass
class SolverResult:
    status: str
    model: SmtModel | None = None
    time: float = 0.0
    reason: str = ""

    def __post_init__(self):
        if (self.status == SAT) != (self.model is not None):
            raise ValueError("a model is present exactly for sat results")


def default_solver_cmd() -> str:
    return os.environ.get(SOLVER_ENV, DEFAULT_SOLVER)


def run_solver(script: SmtScript, solver_cmd: str | Sequence[str] | None = None, timeout: float | None = None) -> SolverResult:
    """Run the solver on ``script`` and parse its verdict and model."""
    if timeout is not None and timeout <= 0:
        return SolverResult(UNKNOWN, reason="timeout")
    cmd = solver_cmd or default_solver_cmd()
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    text = script.render()
    start = time.perf_counter()
    try:
        proc = subprocess.run(argv, input=text, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return SolverResult(UNKNOWN, time=time.perf_counter() - start, reason="timeout")
    except OSError as e:
        raise SolverError(f"cannot start solver {argv[0]!r}: {e}") from e
    elapsed = time.perf_counter() - start
    if proc.returncode < 0 and not proc.stdout.strip():
        raise SolverError(f"solver killed by signal {-proc.returncode} (possibly out of memory)")
    return parse_response(proc.stdout, script, elapsed, proc.stderr)


def parse_response(out: str, script: SmtScript, elapsed: float = 0.0, stderr: str = "") -> SolverResult:
    try:
        items = parse_sexps(out)
    except ModelError as e:
        raise SolverError(f"malformed solver output: {e}") from e
    if not items:
        raise SolverError(f"solver produced no verdict{': ' + stderr.strip() if stderr.strip() else ''}")
    verdict = items[0]
    if isinstance(verdict, list) and verdict and verdict[0] == "error":
        raise SolverError(f"solver error: {' '.join(map(str, verdict[1:]))}")
    if verdict == UNSAT:
        return SolverResult(UNSAT, time=elapsed)
    if verdict == UNKNOWN:
        return SolverResult(UNKNOWN, time=elapsed, reason="solver returned unknown")
    if verdict != SAT:
        raise SolverError(f"unexpected solver verdict {verdict!r}")
    pairs = []
    for resp in items[1:]:
        if not isinstance(resp, list) or (resp and resp[0] == "error"):
            raise SolverError(f"solver error in model output: {resp!r}")
        pairs.extend(resp)
    if len(pairs) != len(script.queries):
        raise SolverError(f"expected {len(script.queries)} model values, got {len(pairs)}")
    model = SmtModel()
    for q, pair in zip(script.queries, pairs):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SolverError(f"malformed get-value entry {pair!r}")
        if q[0] != "app" or any(isinstance(a, tuple) for a in q[2:]):
            raise SolverError(f"query {q!r} is not a ground application")
        try:
            model.set(q[1], tuple(q[2:]), sexp_value(pair[1]))
        except ModelError as e:
            raise SolverError(str(e)) from e
    return SolverResult(SAT, model, elapsed)


# --------------------------------------------------------------------------
# Extraction


def _input_space(names: Sequence[str]) -> list[tuple[bool, ...]]:
    import itertools

    return list(itertools.product((False, True), repeat=len(names)))


def _labels(model: SmtModel, interface: ProcessInterface, states) -> dict[int, frozenset[str]]:
    return {l: frozenset(o for o in interface.outputs if model.value(f"out_{o}", (l,))) for l in states}


def _complete(states, names, labels, step, pass_) -> list[tuple]:
    """Fill unconstrained points with self-loops; returns the filled keys."""
    filled = []
    for l in states:
        for r in _input_space(names):
            for sp in (False, True):
                if (l, r, sp) not in step:
                    step[(l, r, sp)] = l
                    filled.append(("step", l, r, sp))
            if "send" in labels[l] and (l, r) not in pass_:
                pass_[(l, r)] = l
                filled.append(("pass", l, r))
    return filled


def model_violations(enc: Encoding, model: SmtModel) -> list[str]:
    """Re-evaluate every assertion and the one-token property on ``model``."""
    problems = []
    for fam, term in enc.script.assertions:
        try:
            ok = evaluate(term, model)
        except ModelError as e:
            problems.append(f"{fam}: {e}")
            continue
        if not ok:
            problems.append(f"{fam}: assertion fails")
    if problems:
        return problems
    return [f"token count: {msg}" for msg in _token_violations(enc, model)]


def _token_violations(enc: Encoding, model: SmtModel) -> list[str]:
    tok = lambda l: model.value("out_tok", (l,))
    out = []
    if enc.mode == "ring":
        n = enc.processes
        seen, stack = {0}, [0]
        while stack:
            t = stack.pop()
            count = sum(1 for i in range(1, n + 1) if tok(model.value(f"d_{i}", (t,))))
            if count != 1:
                out.append(f"global state {t} has {count} tokens")
            for v in enc.valuations:
                u = model.value("delta", (t, *ring_step_bits(v, n)))
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
    elif enc.mode == "network":
        tau = lambda l, r, inp: model.value("tau", (l, *r, inp))
        tau_pass = lambda l, r: model.value("tau_pass", (l, *r))
        out_fn = lambda o, l: model.value(f"out_{o}", (l,))
        names = enc.interface.env_inputs
        it, ii = model.value("init_tok", ()), model.value("init_idle", ())
        for b in enc.blocks:
            nsites = len(b.sites)
            starts = []
            for holder in b.nodes:
                starts.append(tuple(
                    (it if x == holder else ii) if k < nsites else (HUB_GOT if x == holder else 0)
                    for k, x in enumerate(b.nodes)
                ))
            seen, stack = set(starts), list(starts)
            while stack:
                s = stack.pop()
                count = sum(1 for k in range(nsites) if tok(s[k])) + sum(
                    1 for k in range(nsites, len(s)) if s[k] in (HUB_GOT, HUB_SEND)
                )
                if count != 1:
                    out.append(f"block {b.index} state {s} has {count} tokens")
                for v in b.valuations:
                    u = tuple(block_successor(b, s, v, out_fn, tau, tau_pass, names))
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
    return out


def extract_process(enc: Encoding, model: SmtModel) -> ProcessLts:
    """Read the synthesized process off ``model`` and restrict it to reachable states.

    The model is first re-checked against every assertion of the script;
    points the solver left unconstrained are completed with self-loops.
    """
    problems = model_violations(enc, model)
    if problems:
        raise ExtractionError("model violates its script: " + "; ".join(problems[:5]))
    iface = enc.interface
    names = iface.env_inputs
    states = tuple(range(enc.bound_local))
    labels = _labels(model, iface, states)
    step: dict = {}
    pass_: dict = {}
    if enc.mode in ("ring", "network"):
        # both encodings share the process's move tables tau and tau_pass
        if enc.mode == "ring":
            init_token, init_idle = model.value("d_1", (0,)), model.value("d_2", (0,))
        else:
            init_token, init_idle = model.value("init_tok", ()), model.value("init_idle", ())
        for l in states:
            for r in _input_space(names):
                for sp in (False, True):
                    step[(l, r, sp)] = model.value("tau", (l, *r, sp))
                if "send" in labels[l]:
                    pass_[(l, r)] = model.value("tau_pass", (l, *r))
    elif enc.mode == "single":
        init_token, init_idle = model.value("init_tok", ()), model.value("init_idle", ())
        for l in states:
            for v in enc.valuations:
                r = v.input_bits(1, names)
                u = model.value("delta", (l, *v.bits))
                if v.sched == 1:
                    step[(l, r, v.holds("send_2"))] = u
                elif "send" in labels[l] and not v.holds("send_2"):
                    pass_[(l, r)] = u
    else:
        raise ExtractionError(f"unknown encoding mode {enc.mode!r}")
    _complete(states, names, labels, step, pass_)
    p = ProcessLts(states, init_token, init_idle, names, iface.outputs, labels, step, pass_)
    return p.restrict()


# --------------------------------------------------------------------------
# Bound schedules


@dataclass(frozen=True)
class BoundSchedule:
    """Ordered ``(bound_local, bound_global)`` pairs to attempt."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("empty bound schedule")
        for l, g in self.pairs:
            if l < 1 or g < 1:
                raise ValueError(f"bounds must be positive, got {(l, g)}")
        for (l0, g0), (l1, g1) in zip(self.pairs, self.pairs[1:]):
            if not (l1 > l0 or g1 > g0):
                raise ValueError(f"schedule step {(l0, g0)} -> {(l1, g1)} does not increase")

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def default(cls, n: int, max_local: int = 4) -> "BoundSchedule":
        """For local bound ``l`` = 1, 2, ... try global bounds ``l .. l*n``."""
        return cls(tuple((l, g) for l in range(1, max_local + 1) for g in range(l, l * n + 1)))

    @classmethod
    def local_only(cls, max_local: int = 4) -> "BoundSchedule":
        """Schedules for encodings without a separate global bound."""
        return cls(tuple((l, l) for l in range(1, max_local + 1)))

    @classmethod
    def parse(cls, text: str) -> "BoundSchedule":
        """Parse ``"l1,g1;l2,g2;..."`` (a lone ``l`` means ``l,l``)."""
        pairs = []
        for item in text.split(";"):
            item = item.strip()
            if not item:
                continue
            parts = [p.strip() for p in item.split(",")]
            try:
                nums = [int(p) for p in parts]
            except ValueError:
                raise ValueError(f"bad bound pair {item!r}") from None
            if len(nums) == 1:
                nums *= 2
            if len(nums) != 2:
                raise ValueError(f"bad bound pair {item!r}")
            pairs.append((nums[0], nums[1]))
        return cls(tuple(pairs))


# --------------------------------------------------------------------------
# Synthesis problems


@dataclass
class Problem:
    """A spec turned into automata plus an encoder for a given bound."""

    mode: str
    spec: IndexedSpec
    interface: ProcessInterface
    ucws: list[Ucw]
    cutoff: CutoffClass | None = None
    n: int | None = None
    graph: NetworkGraph | None = None
    blocks: list = field(default_factory=list)  # representatives (network mode)
    expr: tuple | None = None
    formulas: list[Formula] = field(default_factory=list)

    def encode(self, bound_local: int, bound_global: int, pin: ProcessLts | None = None) -> Encoding:
        if self.mode == "ring":
            return encode_ring(self.ucws[0], self.n, bound_global, bound_local, self.interface, pin=pin)
        if self.mode == "network":
            return encode_network(self.blocks, self.ucws, bound_local, self.interface, expr=self.expr, pin=pin)
        return encode_single_process(self.ucws[0], bound_local, self.interface, pin=pin)

    @property
    def uses_global_bound(self) -> bool:
        return self.mode == "ring"


def ring_groups(n: int) -> list[ExclusiveGroup]:
    nodes = range(1, n + 1)
    return [
        ExclusiveGroup(frozenset(f"tok_{i}" for i in nodes)),
        ExclusiveGroup(frozenset(f"{SCHED}_{i}" for i in nodes), exactly=True),
    ]


def ring_formula(spec: IndexedSpec, n: int) -> Formula:
    return augment_fairness(instantiate(spec, n), "ring", n)


def single_formula(spec: IndexedSpec) -> Formula:
    """Fair scheduling of the process and its neighbour implies the token
    assumption guarantee plus token release.

    As in a ring, the neighbour's ``send_2`` stays raised until process 1
    is scheduled and sees it; without this the environment could hide every
    offered token.
    """
    send2 = signal("send", 2)
    held = Globally(Implies(send2, WeakUntil(send2, And(send2, sched(1)))))
    premise = conj([fair_scheduling([1, 2]), held])
    return Implies(premise, conj([build_token_assumption(spec), token_release(1)]))


def ground_over(spec: IndexedSpec, nodes: Sequence[int]) -> Formula:
    out = []
    for part in spec.parts:
        for binding in part.assignments(list(nodes)):
            out.append(substitute(part.body, binding))
    return conj(out)


def network_formula(spec: IndexedSpec, g: NetworkGraph) -> Formula:
    """The indexed formula over all nodes of ``g`` with network fairness premises."""
    return augment_fairness(ground_over(spec, g.nodes), "network", len(g.nodes), scheduled=g.nodes, release=g.nodes)


def _block_formula(body: Formula, rep: NetworkGraph) -> Formula:
    return augment_fairness(body, "network", len(rep.nodes), scheduled=rep.nodes, release=rep.sites)


def _block_groups(rep: NetworkGraph) -> list[ExclusiveGroup]:
    return [
        ExclusiveGroup(frozenset(f"tok_{x}" for x in rep.sites)),
        ExclusiveGroup(frozenset(f"{SCHED}_{x}" for x in rep.nodes), exactly=True),
    ]


def ring_problem(spec: IndexedSpec, interface: ProcessInterface, n: int | None = None) -> Problem:
    cls = classify(spec)
    n = n or cls.cutoff
    f = ring_formula(spec, n)
    return Problem("ring", spec, interface, [ltl_to_ucw(f, ring_groups(n))], cls, n, formulas=[f])


def single_problem(spec: IndexedSpec, interface: ProcessInterface) -> Problem:
    cls = classify(spec)
    f = single_formula(spec)
    groups = [ExclusiveGroup(frozenset({f"{SCHED}_1", f"{SCHED}_2"}), exactly=True)]
    return Problem("single", spec, interface, [ltl_to_ucw(f, groups)], cls, 2, formulas=[f])


def network_problem(
    spec: IndexedSpec, interface: ProcessInterface, g: NetworkGraph, *, symmetry_reduce_blocks: bool = False
) -> Problem:
    """Blocks for every connection topology the quantifiers can see.

    A purely universal spec is checked on every ``k``-topology with the
    permutation-invariant site obligation; other prefixes are expanded into
    a Boolean combination of per-topology obligations.
    """
    g.validate()
    if spec.universal:
        k = max(len(p.variables) for p in spec.parts)
        cts = k_topology(g, k)
        if symmetry_reduce_blocks:
            cts = symmetry_reduce(cts, is_symmetric(spec))
        body = site_obligation(spec, k)
        reps = [ct.representative for ct in cts]
        formulas = [_block_formula(body, rep) for rep in reps]
        expr = None
    else:
        if symmetry_reduce_blocks:
            raise SpecError("symmetry reduction needs a purely universal specification")
        reps, formulas, kids = [], [], []
        for part in spec.parts:
            red = rewrite_quantifiers(part, g)
            offset = len(reps)
            for ob in red.obligations:
                rep = red.topologies[ob.topology].representative
                reps.append(rep)
                formulas.append(_block_formula(substitute(part.body, dict(ob.binding)), rep))
            kids.append(_shift(red.expr, offset))
        expr = ("and", tuple(kids)) if len(kids) > 1 else kids[0]
    ucws = [ltl_to_ucw(f, _block_groups(rep)) for f, rep in zip(formulas, reps)]
    return Problem("network", spec, interface, ucws, graph=g, blocks=reps, expr=expr, formulas=formulas)


def _shift(expr: tuple, offset: int) -> tuple:
    if expr[0] == "var":
        return ("var", expr[1] + offset)
    return (expr[0], tuple(_shift(c, offset) for c in expr[1]))


# --------------------------------------------------------------------------
# Verification


@dataclass
class Verdict:
    label: str
    holds: bool
    states: int
    tokens_ok: bool
    invariance_ok: bool
    counterexample: str = ""
    time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.holds and self.tokens_ok and self.invariance_ok


def check_composition(g: GlobalLts, f: Formula, label: str) -> Verdict:
    start = time.perf_counter()
    tokens = exactly_one_token(g)
    inv = unscheduled_invariance_violations(g)
    res = model_check(g, f)
    cex = res.describe(g) if isinstance(res, LassoCounterexample) else ""
    return Verdict(label, isinstance(res, Holds), len(g.states), not tokens, not inv, cex,
                   time.perf_counter() - start)


def verify_ring(p: ProcessLts, spec: IndexedSpec, sizes: Sequence[int]) -> list[Verdict]:
    return [check_composition(compose_ring(p, n), ring_formula(spec, n), f"ring n={n}") for n in sizes]


def verify_network(p: ProcessLts, spec: IndexedSpec, g: NetworkGraph) -> list[Verdict]:
    """Check every choice of initial token holder on the concrete graph."""
    f = network_formula(spec, g)
    return [
        check_composition(compose_network(p, g, holder=h), f, f"graph token at {h}")
        for h in g.nodes
    ]


# --------------------------------------------------------------------------
# The bounds loop


@dataclass
class Attempt:
    bound_local: int
    bound_global: int
    status: str
    time: float
    reason: str = ""
    assertions: int = 0
    script: str | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class Synthesized:
    process: ProcessLts
    attempts: list[Attempt]
    encoding: Encoding
    model: SmtModel


@dataclass
class NoneWithinSchedule:
    attempts: list[Attempt]

    def __bool__(self) -> bool:
        return False


def synthesize(
    problem: Problem,
    schedule: BoundSchedule | None = None,
    solver_cmd: str | None = None,
    *,
    timeout: float | None = None,
    emit_smt: str | Path | None = None,
) -> Synthesized | NoneWithinSchedule:
    """Try each bound pair in turn until the solver finds a model.

    Unknown answers (including timeouts) are recorded and the next pair is
    tried.  A model is re-checked and extracted before it is returned.
    """
    if schedule is None:
        if problem.uses_global_bound:
            schedule = BoundSchedule.default(problem.n)
        else:
            schedule = BoundSchedule.local_only()
    attempts: list[Attempt] = []
    done: set[tuple[int, int]] = set()
    for bl, bg in schedule:
        key = (bl, bg if problem.uses_global_bound else bl)
        if key in done:
            continue
        done.add(key)
        enc = problem.encode(bl, bg)
        path = None
        if emit_smt is not None:
            d = Path(emit_smt)
            d.mkdir(parents=True, exist_ok=True)
            path = d / f"{problem.mode}_l{bl}_g{key[1]}.smt2"
            path.write_text(enc.render())
        res = run_solver(enc.script, solver_cmd, timeout)
        attempts.append(Attempt(bl, key[1], res.status, round(res.time, 3), res.reason,
                                len(enc.script.assertions), str(path) if path else None))
        if res.status == SAT:
            return Synthesized(extract_process(enc, res.model), attempts, enc, res.model)
    return NoneWithinSchedule(attempts)
