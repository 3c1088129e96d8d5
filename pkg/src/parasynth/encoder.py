"""Bounded-synthesis constraints for token rings, token-passing networks,
and single processes under a token assumption.

All three encodings share the annotation constraints: a Boolean
reachability flag ``lb_q(t)`` and a rational rank ``ls_q(t)`` per co-Büchi
state ``q`` and system state ``t``.  The rank must grow strictly whenever a
rejecting state is entered, which rules out runs visiting rejecting states
infinitely often.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Collection, Sequence

from .automaton import Label, Ucw
from .indexed import SCHED, ProcessInterface
from .ltl import SpecError, atom
from .smt import (
    BOOL,
    INT,
    REAL,
    And,
    Eq,
    Ge,
    Gt,
    Implies,
    Ite,
    Le,
    Lt,
    Not,
    Or,
    SmtScript,
    app,
)

HUB_WAIT, HUB_GOT, HUB_SEND = 0, 1, 2
HUB_STATES = 3


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class EnvValuation:
    """Environment letter: request bits per process plus the scheduled node."""

    inputs: tuple[tuple[str, bool], ...]  # (atom key, value)
    sched: int
    sched_bits: tuple[bool, ...]

    def holds(self, key: str) -> bool:
        for k, v in self.inputs:
            if k == key:
                return v
        raise KeyError(key)

    @property
    def bits(self) -> tuple[bool, ...]:
        return tuple(v for _, v in self.inputs) + self.sched_bits

    def input_bits(self, proc: int, names: Sequence[str]) -> tuple[bool, ...]:
        return tuple(self.holds(f"{n}_{proc}") for n in names)

    def masked_bits(self, keep: Collection[int]) -> tuple[bool, ...]:
        """``bits`` with the inputs of processes outside ``keep`` forced to false."""
        keep = {str(p) for p in keep}
        return tuple(v and k.rsplit("_", 1)[1] in keep for k, v in self.inputs) + self.sched_bits


def ring_step_bits(v: EnvValuation, n: int) -> tuple[bool, ...]:
    """The part of ``v`` a ring step depends on.

    Only the scheduled process and its predecessor (which may be passing
    the token) read their inputs; everyone else stays put.
    """
    return v.masked_bits((v.sched, (v.sched - 2) % n + 1))


def sched_bit_count(count: int) -> int:
    return max(1, math.ceil(math.log2(count))) if count > 1 else 1


def env_valuations(names: Sequence[str], procs: Sequence[int], nodes: Sequence[int]) -> list[EnvValuation]:
    """All valuations of ``names`` per process and a scheduling choice.

    Scheduling is binary encoded; codes that name no node are skipped, so
    exactly one node is scheduled in every enumerated letter.
    """
    keys = [f"{n}_{p}" for p in procs for n in names]
    m = sched_bit_count(len(nodes))
    out = []
    for idx, node in enumerate(nodes):
        sbits = tuple(bool(idx >> b & 1) for b in range(m))
        for vals in itertools.product((False, True), repeat=len(keys)):
            out.append(EnvValuation(tuple(zip(keys, vals)), node, sbits))
    return out


@dataclass
class Encoding:
    """A script plus everything needed to read a model back."""

    script: SmtScript
    mode: str
    bound_local: int
    bound_global: int
    interface: ProcessInterface
    processes: int = 1
    valuations: list[EnvValuation] = field(default_factory=list)
    blocks: list = field(default_factory=list)
    ucws: list[Ucw] = field(default_factory=list)

    def render(self) -> str:
        return self.script.render()


# --------------------------------------------------------------------------
# Annotation


def interface_kind(interface: ProcessInterface) -> Callable[[str, int], str]:
    """Classify an indexed atom as a process ``output`` or an ``env`` signal."""

    def kind(name: str, idx: int) -> str:
        if name in interface.outputs:
            return "output"
        if name in interface.env_inputs or name == SCHED:
            return "env"
        raise EncodingError(f"label mentions undeclared atom {name}_{idx}")

    return kind


def _split_label(label: Label, kind_of: Callable[[str, int], str]):
    env, out = [], []
    for key, pos in sorted(label):
        a = atom(key)
        if a.index is None:
            raise EncodingError(f"label mentions unindexed atom {key!r}")
        (out if kind_of(a.name, a.index.base) == "output" else env).append((a.name, a.index.base, pos, key))
    return env, out


def _env_literal(name: str, idx: int, key: str, val: EnvValuation) -> bool:
    if name == SCHED:
        return val.sched == idx
    return val.holds(key)


def encode_annotations(
    script: SmtScript,
    ucw: Ucw,
    interface: ProcessInterface,
    states: Sequence[tuple],
    valuations: Sequence[EnvValuation],
    output: Callable[[str, int, tuple], object],
    successor: Callable[[tuple, EnvValuation], tuple],
    initial: Sequence[tuple],
    prefix: str = "",
    kind_of: Callable[[str, int], str] | None = None,
) -> None:
    """Assert the reachability/rank annotation for ``ucw``.

    System states are tuples of integers, passed to the annotation
    functions as separate arguments.  ``output(name, process, s)`` is the
    term for an output atom in state ``s``; ``successor(s, valuation)`` the
    tuple of terms for the next system state.
    """
    lb = lambda q, s: app(f"{prefix}lb_{q}", *s)
    ls = lambda q, s: app(f"{prefix}ls_{q}", *s)
    arity = len(states[0])
    used_rank: set[int] = set()
    for q in ucw.states:
        script.declare(f"{prefix}lb_{q}", [INT] * arity, BOOL)
    for s0 in initial:
        script.add("annotation: initial", lb(ucw.initial, s0))
    kind_of = kind_of or interface_kind(interface)
    parsed = [(q, _split_label(lab, kind_of), r) for q, lab, r in ucw.edges]
    for q, (env, out), r in parsed:
        for t in states:
            guard_out = And(*[
                output(name, idx, t) if pos else Not(output(name, idx, t)) for name, idx, pos, _ in out
            ])
            pre = And(lb(q, t), guard_out)
            if r == ucw.sink:
                # entering the universally rejecting sink is forbidden
                script.add("annotation: sink", Not(pre))
                continue
            for val in valuations:
                if not all(_env_literal(n, i, k, val) == p for n, i, p, k in env):
                    continue
                nxt = successor(t, val)
                rank_cmp = Gt if r in ucw.rejecting else Ge
                used_rank.update((q, r))
                script.add(
                    "annotation: transition",
                    Implies(pre, And(lb(r, nxt), rank_cmp(ls(r, nxt), ls(q, t)))),
                )
    for q in sorted(used_rank):
        script.declare(f"{prefix}ls_{q}", [INT] * arity, REAL)


def annotation_queries(script: SmtScript, ucw: Ucw, states: Sequence[tuple], prefix: str = "") -> None:
    for q in ucw.states:
        for s in states:
            script.queries.append(app(f"{prefix}lb_{q}", *s))
            if f"{prefix}ls_{q}" in script.decls:
                script.queries.append(app(f"{prefix}ls_{q}", *s))


def _declare_outputs(script: SmtScript, interface: ProcessInterface) -> None:
    for o in interface.outputs:
        script.declare(f"out_{o}", [INT], BOOL)


def _output_queries(script: SmtScript, interface: ProcessInterface, bound_local: int) -> None:
    for o in interface.outputs:
        for l in range(bound_local):
            script.queries.append(app(f"out_{o}", l))


def _in_range(x, bound: int):
    return And(Ge(x, 0), Lt(x, bound))


def _check_bounds(bound_local: int, bound_global: int | None = None) -> None:
    if bound_local < 1:
        raise EncodingError("local bound must be at least 1")
    if bound_global is not None and bound_global < 1:
        raise EncodingError("global bound must be at least 1")


# --------------------------------------------------------------------------
# Rings


def encode_ring(
    ucw: Ucw,
    n: int,
    bound_global: int,
    bound_local: int,
    interface: ProcessInterface,
    *,
    pin=None,
) -> Encoding:
    """Isomorphic token-ring synthesis with ``n`` processes.

    The global transition function ``delta`` is constrained through the
    local projections ``d_i``; isomorphism holds because every process
    moves through the same local tables ``tau`` and ``tau_pass``.
    """
    if n < 2:
        raise EncodingError("a ring needs at least two processes")
    _check_bounds(bound_local, bound_global)
    script = SmtScript()
    script.comments.append(f"ring n={n} global={bound_global} local={bound_local}")
    names = interface.env_inputs
    procs = list(range(1, n + 1))
    vals = env_valuations(names, procs, procs)
    T = range(bound_global)
    L = range(bound_local)
    succ = lambda i: i % n + 1
    pred = lambda i: (i - 2) % n + 1

    nbits = len(vals[0].bits)
    script.declare("delta", [INT] + [BOOL] * nbits, INT, bound=bound_global)
    for i in procs:
        script.declare(f"d_{i}", [INT], INT, bound=bound_local)
    tau, tau_pass, rvals = _declare_tables(script, names, bound_local)
    _declare_outputs(script, interface)

    delta = lambda t, v: app("delta", t, *ring_step_bits(v, n))
    d = lambda i, t: app(f"d_{i}", t)
    out = lambda o, x: app(f"out_{o}", x)
    tok = lambda x: out("tok", x)
    send = lambda x: out("send", x)

    encode_annotations(
        script, ucw, interface, [(t,) for t in T], vals,
        output=lambda name, i, s: out(name, d(i, s[0])),
        successor=lambda s, v: (delta(s[0], v),),
        initial=[(0,)],
    )

    for t in T:
        for v in vals:
            script.add("range: global", _in_range(delta(t, v), bound_global))
        for i in procs:
            script.add("range: local", _in_range(d(i, t), bound_local))

    # token discipline
    script.add("token: initial", tok(d(1, 0)))
    for i in procs[1:]:
        script.add("token: initial", Not(tok(d(i, 0))))
        if i > 2:
            script.add("token: initial", Eq(d(i, 0), d(2, 0)))
    for t in T:
        for i in procs:
            script.add("token: send needs token", Implies(send(d(i, t)), tok(d(i, t))))
        for v in vals:
            s = v.sched
            for i in procs:
                nxt = d(i, delta(t, v))
                passing = s == succ(i)
                receiving = s == i
                if passing:
                    script.add("token: release", Implies(send(d(i, t)), Not(tok(nxt))))
                if receiving:
                    script.add("token: receive", Implies(send(d(pred(i), t)), tok(nxt)))
                keep = Not(send(d(i, t))) if passing else True
                script.add("token: persist", Implies(And(tok(d(i, t)), keep), tok(nxt)))
                gain = Not(send(d(pred(i), t))) if receiving else True
                script.add("token: stay without", Implies(And(Not(tok(d(i, t))), gain), Not(tok(nxt))))
                # asynchrony: unscheduled processes only move to pass the token
                if not receiving:
                    cond = Not(send(d(i, t))) if passing else True
                    script.add("asynchrony", Implies(cond, Eq(nxt, d(i, t))))

    # isomorphism: every process moves by the shared tables tau / tau_pass
    for t in T:
        for v in vals:
            for i in procs:
                r = v.input_bits(i, names)
                nxt = d(i, delta(t, v))
                if v.sched == i:
                    script.add("isomorphism: scheduled",
                               Eq(nxt, tau(d(i, t), r, send(d(pred(i), t)))))
                elif v.sched == succ(i):
                    script.add("isomorphism: passing", Implies(send(d(i, t)), Eq(nxt, tau_pass(d(i, t), r))))

    if pin is not None:
        script.add("pin", Eq(d(1, 0), pin.init_token))
        script.add("pin", Eq(d(2, 0), pin.init_idle))
        _pin_tables(script, pin, out, tau, tau_pass, rvals)

    for t in T:
        script.queries += list(dict.fromkeys(delta(t, v) for v in vals))
        for i in procs:
            script.queries.append(d(i, t))
    _table_queries(script, L, rvals, tau, tau_pass)
    _output_queries(script, interface, bound_local)
    annotation_queries(script, ucw, [(t,) for t in T])
    return Encoding(script, "ring", bound_local, bound_global, interface, n, vals, ucws=[ucw])


def _declare_tables(script: SmtScript, names: Sequence[str], bound_local: int):
    """The shared local transition tables and their range constraints."""
    script.declare("tau", [INT] + [BOOL] * len(names) + [BOOL], INT, bound=bound_local)
    script.declare("tau_pass", [INT] + [BOOL] * len(names), INT, bound=bound_local)
    tau = lambda l, r, inp: app("tau", l, *r, inp)
    tau_pass = lambda l, r: app("tau_pass", l, *r)
    rvals = list(itertools.product((False, True), repeat=len(names)))
    for l in range(bound_local):
        for r in rvals:
            for inp in (False, True):
                script.add("range: local", _in_range(tau(l, r, inp), bound_local))
            script.add("range: local", _in_range(tau_pass(l, r), bound_local))
    return tau, tau_pass, rvals


def _table_queries(script: SmtScript, L, rvals, tau, tau_pass) -> None:
    for l in L:
        for r in rvals:
            for inp in (False, True):
                script.queries.append(tau(l, r, inp))
            script.queries.append(tau_pass(l, r))


def _pin_tables(script: SmtScript, pin, out, tau, tau_pass, rvals) -> None:
    """Force the shared tables and outputs to be those of ``pin``."""
    for o in pin.outputs:
        for l in pin.states:
            script.add("pin", Eq(out(o, l), o in pin.labels[l]))
    for l in pin.states:
        for r in rvals:
            for inp in (False, True):
                script.add("pin", Eq(tau(l, r, inp), pin.step[(l, r, inp)]))
            if pin.sends(l):
                script.add("pin", Eq(tau_pass(l, r), pin.pass_[(l, r)]))


# --------------------------------------------------------------------------
# Networks


@dataclass
class Block:
    """One connection topology instantiated with sites and fixed hubs."""

    index: int
    sites: tuple[int, ...]
    hubs: tuple[int, ...]
    preds: dict[int, tuple[int, ...]]
    states: list[tuple[int, ...]]  # site-local states followed by hub states
    valuations: list[EnvValuation]

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.sites + self.hubs


def hub_step(h: int, receiving: bool) -> int:
    if h == HUB_WAIT:
        return HUB_GOT if receiving else HUB_WAIT
    return HUB_SEND


def make_block(index: int, graph, bound_local: int, names: Sequence[str]) -> Block:
    sites = tuple(n for n in graph.nodes if n not in graph.hubs)
    hubs = tuple(sorted(graph.hubs))
    if not sites:
        raise EncodingError("connection topology has no sites")
    nodes = sites + hubs
    preds = {x: tuple(graph.predecessors(x)) for x in nodes}
    radices = [bound_local] * len(sites) + [HUB_STATES] * len(hubs)
    states = list(itertools.product(*[range(rdx) for rdx in radices]))
    vals = env_valuations(names, sites, nodes)
    return Block(index, sites, hubs, preds, states, vals)


def encode_network(
    cts: Sequence,
    ucws: Ucw | Sequence[Ucw],
    bound_local: int,
    interface: ProcessInterface,
    *,
    expr: tuple | None = None,
    pin=None,
) -> Encoding:
    """Token-passing network synthesis over a set of connection topologies.

    Each topology contributes a block whose system states are tuples of
    site-local states and hub states.  The synthesized process is given by
    the shared symbols ``tau`` (scheduled move), ``tau_pass`` (move when a
    successor takes the token), the output symbols and the two initial
    states, so every block and every site uses the same implementation.
    ``expr`` combines block verdicts (``('var', i)``, ``('and', kids)``,
    ``('or', kids)``); the default is their conjunction.
    """
    _check_bounds(bound_local)
    if not cts:
        raise EncodingError("no connection topologies given")
    if isinstance(ucws, Ucw):
        ucws = [ucws] * len(cts)
    if len(ucws) != len(cts):
        raise EncodingError("need one automaton per topology")
    script = SmtScript()
    script.comments.append(f"network blocks={len(cts)} local={bound_local}")
    names = interface.env_inputs
    L = range(bound_local)

    tau, tau_pass, rvals = _declare_tables(script, names, bound_local)
    script.declare("init_tok", [], INT, bound=bound_local)
    script.declare("init_idle", [], INT, bound=bound_local)
    _declare_outputs(script, interface)
    out = lambda o, x: app(f"out_{o}", x)
    init_tok, init_idle = app("init_tok"), app("init_idle")

    script.add("range: local", _in_range(init_tok, bound_local))
    script.add("range: local", _in_range(init_idle, bound_local))

    script.add("token: initial", out("tok", init_tok))
    script.add("token: initial", Not(out("tok", init_idle)))
    for l in L:
        script.add("token: send needs token", Implies(out("send", l), out("tok", l)))
        for r in rvals:
            script.add("token: receive", out("tok", tau(l, r, True)))
            script.add("token: release", Implies(out("send", l), Not(out("tok", tau_pass(l, r)))))
            script.add("token: persist", Implies(out("tok", l), out("tok", tau(l, r, False))))
            script.add("token: stay without", Implies(Not(out("tok", l)), Not(out("tok", tau(l, r, False)))))

    blocks = []
    guards = []
    needs_guards = expr is not None and not _is_conjunction(expr)
    for b, (ct, ucw) in enumerate(zip(cts, ucws)):
        graph = ct.representative if hasattr(ct, "representative") else ct
        block = make_block(b, graph, bound_local, names)
        blocks.append(block)
        prefix = f"b{b}_"
        guard = None
        if needs_guards:
            guard = script.declare(f"{prefix}holds", [], BOOL)
            guards.append(app(guard))
        _encode_block(script, block, ucw, interface, prefix, out, tau, tau_pass, init_tok, init_idle, guard)

    if needs_guards:
        script.add("reduction", _expr_term(expr, guards))

    if pin is not None:
        script.add("pin", Eq(init_tok, pin.init_token))
        script.add("pin", Eq(init_idle, pin.init_idle))
        _pin_tables(script, pin, out, tau, tau_pass, rvals)

    _table_queries(script, L, rvals, tau, tau_pass)
    script.queries += [init_tok, init_idle]
    _output_queries(script, interface, bound_local)
    for block, ucw in zip(blocks, ucws):
        annotation_queries(script, ucw, block.states, f"b{block.index}_")
    if needs_guards:
        script.queries.extend(guards)
    return Encoding(
        script, "network", bound_local, max(len(b.states) for b in blocks), interface,
        blocks=blocks, ucws=list(ucws),
    )


def _is_conjunction(expr) -> bool:
    return expr[0] == "var" or (expr[0] == "and" and all(c[0] == "var" for c in expr[1]))


def _expr_term(expr, guards):
    if expr[0] == "var":
        return guards[expr[1]]
    kids = [_expr_term(c, guards) for c in expr[1]]
    return And(*kids) if expr[0] == "and" else Or(*kids)


def block_successor(block: Block, state: tuple[int, ...], val: EnvValuation, out, tau, tau_pass, names):
    """Terms for each component's next local state (sites first, then hubs)."""
    pos = {x: k for k, x in enumerate(block.nodes)}
    nsites = len(block.sites)

    def sending(x):
        k = pos[x]
        if k < nsites:
            return out("send", state[k])
        return state[k] == HUB_SEND

    s = val.sched
    incoming = Or(*[sending(p) for p in block.preds[s]])
    nxt: list[object] = []
    for k, x in enumerate(block.nodes):
        is_site = k < nsites
        if x == s:
            if is_site:
                nxt.append(tau(state[k], val.input_bits(x, names), incoming))
            else:
                if state[k] == HUB_WAIT:
                    nxt.append(Ite(incoming, HUB_GOT, HUB_WAIT))
                else:
                    nxt.append(HUB_SEND)
        elif x in block.preds[s]:
            snd = sending(x)
            if is_site:
                nxt.append(Ite(snd, tau_pass(state[k], val.input_bits(x, names)), state[k]))
            else:
                nxt.append(HUB_WAIT if state[k] == HUB_SEND else state[k])
        else:
            nxt.append(state[k])
    return nxt


def _encode_block(script, block: Block, ucw, interface, prefix, out, tau, tau_pass, init_tok, init_idle, guard):
    names = interface.env_inputs
    nsites = len(block.sites)
    site_pos = {x: k for k, x in enumerate(block.sites)}

    def output(name, idx, s):
        if idx not in site_pos:
            raise EncodingError(f"atom {name}_{idx} does not refer to a site of the topology")
        return out(name, s[site_pos[idx]])

    def successor(s, val):
        return tuple(block_successor(block, s, val, out, tau, tau_pass, names))

    initial = []
    for holder in block.nodes:
        parts = []
        for k, x in enumerate(block.nodes):
            if k < nsites:
                parts.append(init_tok if x == holder else init_idle)
            else:
                parts.append(HUB_GOT if x == holder else HUB_WAIT)
        initial.append(tuple(parts))

    sub = SmtScript()
    encode_annotations(sub, ucw, interface, block.states, block.valuations,
                       output=output, successor=successor, initial=initial, prefix=prefix)
    for d in sub.decls.values():
        script.declare(d.name, d.args, d.ret)
    for fam, term in sub.assertions:
        script.add(fam, term if guard is None else Implies(app(guard), term))


# --------------------------------------------------------------------------
# Single process under the token assumption


def encode_single_process(ucw: Ucw, bound_local: int, interface: ProcessInterface, *, pin=None) -> Encoding:
    """One process with its left neighbour's ``send_2`` as an environment input.

    Scheduling chooses between process 1 and the emulated process 2.  The
    process must satisfy the property from both of its initial states.
    """
    _check_bounds(bound_local)
    script = SmtScript()
    script.comments.append(f"single process local={bound_local}")
    # inputs r_1 ... plus send_2, the neighbour's output driven by the environment
    keys_names = interface.env_inputs
    vals = []
    for idx, node in enumerate((1, 2)):
        for bits in itertools.product((False, True), repeat=len(keys_names) + 1):
            inputs = tuple((f"{n}_1", b) for n, b in zip(keys_names, bits)) + (("send_2", bits[-1]),)
            vals.append(EnvValuation(inputs, node, (bool(idx),)))
    T = range(bound_local)
    nbits = len(vals[0].bits)
    script.declare("delta", [INT] + [BOOL] * nbits, INT, bound=bound_local)
    script.declare("init_tok", [], INT, bound=bound_local)
    script.declare("init_idle", [], INT, bound=bound_local)
    _declare_outputs(script, interface)
    out = lambda o, x: app(f"out_{o}", x)
    delta = lambda t, v: app("delta", t, *v.bits)
    init_tok, init_idle = app("init_tok"), app("init_idle")

    def output(name, idx, s):
        if idx == 1:
            return out(name, s[0])
        raise EncodingError(f"atom {name}_{idx} is not an output of process 1")

    base_kind = interface_kind(interface)

    def kind_of(name, idx):
        # the neighbour's signals are emulated by the environment
        return "env" if idx == 2 and name in interface.outputs else base_kind(name, idx)

    encode_annotations(script, ucw, interface, [(t,) for t in T], vals, output=output,
                       successor=lambda s, v: (delta(s[0], v),),
                       initial=[(init_tok,), (init_idle,)], kind_of=kind_of)

    script.add("range: local", _in_range(init_tok, bound_local))
    script.add("range: local", _in_range(init_idle, bound_local))
    for t in T:
        for v in vals:
            script.add("range: local", _in_range(delta(t, v), bound_local))
    script.add("token: initial", out("tok", init_tok))
    script.add("token: initial", Not(out("tok", init_idle)))
    for t in T:
        script.add("token: send needs token", Implies(out("send", t), out("tok", t)))
        for v in vals:
            nxt = delta(t, v)
            s2 = v.holds("send_2")
            if v.sched == 2:
                script.add("token: release", Implies(out("send", t), Not(out("tok", nxt))))
                script.add("token: persist", Implies(And(out("tok", t), Not(out("send", t))), out("tok", nxt)))
                script.add("token: stay without", Implies(Not(out("tok", t)), Not(out("tok", nxt))))
                script.add("asynchrony", Implies(Not(out("send", t)), Eq(nxt, t)))
            else:
                if s2:
                    script.add("token: receive", out("tok", nxt))
                else:
                    script.add("token: stay without", Implies(Not(out("tok", t)), Not(out("tok", nxt))))
                script.add("token: persist", Implies(out("tok", t), out("tok", nxt)))
    # passing the token does not read the neighbour's send signal
    for t in T:
        for v in vals:
            if v.sched == 2 and not v.holds("send_2"):
                twin = EnvValuation(
                    tuple((k, True if k == "send_2" else b) for k, b in v.inputs), v.sched, v.sched_bits
                )
                script.add("input dependence", Eq(delta(t, v), delta(t, twin)))

    if pin is not None:
        for o in pin.outputs:
            for l in pin.states:
                script.add("pin", Eq(out(o, l), o in pin.labels[l]))
        script.add("pin", Eq(init_tok, pin.init_token))
        script.add("pin", Eq(init_idle, pin.init_idle))
        for l in pin.states:
            for v in vals:
                r = v.input_bits(1, keys_names)
                if v.sched == 1:
                    script.add("pin", Eq(delta(l, v), pin.step[(l, r, v.holds("send_2"))]))
                elif pin.sends(l):
                    script.add("pin", Eq(delta(l, v), pin.pass_[(l, r)]))

    for t in T:
        for v in vals:
            script.queries.append(delta(t, v))
    script.queries += [init_tok, init_idle]
    _output_queries(script, interface, bound_local)
    annotation_queries(script, ucw, [(t,) for t in T])
    return Encoding(script, "single", bound_local, bound_local, interface, 1, vals, ucws=[ucw])
