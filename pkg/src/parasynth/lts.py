"""Process implementations, their ring/network compositions, and an
explicit-state LTL\\X model checker used as an independent oracle.

Composition semantics: in every step the environment schedules exactly one
node.  The scheduled node moves on its own inputs; if one of its token
predecessors is sending, that predecessor moves too (it passes the token).
Every other node keeps its state.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .automaton import ExclusiveGroup, label_holds, ltl_to_nba
from .indexed import SCHED
from .ltl import Formula, Not, SpecError, atom_keys, conjuncts, to_string

HUB_WAIT, HUB_GOT, HUB_SEND = 0, 1, 2


class StateLimitError(RuntimeError):
    pass


Bits = tuple  # tuple[bool, ...]


@dataclass
class ProcessLts:
    """One process: Moore outputs per state, a scheduled move and a pass move.

    ``step[(state, inputs, send_prev)]`` is taken when the process is
    scheduled (``send_prev`` is the token-sending signal of its
    predecessors); ``pass_[(state, inputs)]`` when a successor takes the
    token from it.  ``inputs`` is a tuple of booleans ordered like
    ``env_inputs``.
    """

    states: tuple[int, ...]
    init_token: int
    init_idle: int
    env_inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    labels: dict[int, frozenset[str]]
    step: dict[tuple[int, Bits, bool], int]
    pass_: dict[tuple[int, Bits], int]

    def __post_init__(self):
        for l in self.states:
            for r in self.input_space():
                for sp in (False, True):
                    if self.step.get((l, r, sp)) not in self.states:
                        raise ValueError(f"step undefined or out of range at {(l, r, sp)}")
                if self.sends(l) and self.pass_.get((l, r)) not in self.states:
                    raise ValueError(f"pass undefined or out of range at {(l, r)}")

    def input_space(self) -> list[Bits]:
        return list(itertools.product((False, True), repeat=len(self.env_inputs)))

    def sends(self, l: int) -> bool:
        return "send" in self.labels[l]

    def has_token(self, l: int) -> bool:
        return "tok" in self.labels[l]

    def reachable(self) -> set[int]:
        seen = {self.init_token, self.init_idle}
        stack = list(seen)
        while stack:
            l = stack.pop()
            nxt = [self.step[(l, r, sp)] for r in self.input_space() for sp in (False, True)]
            if self.sends(l):
                nxt += [self.pass_[(l, r)] for r in self.input_space()]
            for m in nxt:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return seen

    def restrict(self) -> "ProcessLts":
        """Drop unreachable states and renumber the rest from 0."""
        keep = sorted(self.reachable())
        ren = {l: i for i, l in enumerate(keep)}
        return ProcessLts(
            tuple(range(len(keep))),
            ren[self.init_token],
            ren[self.init_idle],
            self.env_inputs,
            self.outputs,
            {ren[l]: self.labels[l] for l in keep},
            {(ren[l], r, sp): ren[m] for (l, r, sp), m in self.step.items() if l in ren},
            {(ren[l], r): ren[m] for (l, r), m in self.pass_.items() if l in ren and self.sends(l)},
        )

    def to_json(self) -> dict:
        def bits(r):
            return "".join("1" if b else "0" for b in r)

        return {
            "states": list(self.states),
            "init_token": self.init_token,
            "init_idle": self.init_idle,
            "env_inputs": list(self.env_inputs),
            "outputs": list(self.outputs),
            "labels": {str(l): sorted(self.labels[l]) for l in self.states},
            "step": {f"{l}|{bits(r)}|{int(sp)}": m for (l, r, sp), m in sorted(self.step.items())},
            "pass": {f"{l}|{bits(r)}": m for (l, r), m in sorted(self.pass_.items())},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ProcessLts":
        def unbits(s):
            return tuple(c == "1" for c in s)

        step = {}
        for key, m in doc["step"].items():
            l, r, sp = key.split("|")
            step[(int(l), unbits(r), sp == "1")] = m
        pass_ = {}
        for key, m in doc["pass"].items():
            l, r = key.split("|")
            pass_[(int(l), unbits(r))] = m
        return cls(
            tuple(doc["states"]),
            doc["init_token"],
            doc["init_idle"],
            tuple(doc["env_inputs"]),
            tuple(doc["outputs"]),
            {int(l): frozenset(v) for l, v in doc["labels"].items()},
            step,
            pass_,
        )

    def to_dot(self, name: str = "process") -> str:
        lines = [f"digraph {name} {{", "  node [shape=box, style=rounded];"]
        for l in self.states:
            text = " ".join(o if o in self.labels[l] else f"!{o}" for o in self.outputs)
            init = " (init token)" if l == self.init_token else " (init idle)" if l == self.init_idle else ""
            lines.append(f'  s{l} [label="{text}{init}"];')
        edges: dict[tuple[int, int], list[str]] = {}
        for (l, r, sp), m in sorted(self.step.items()):
            cond = ["sched", "send_prev" if sp else "!send_prev"]
            cond += [n if b else f"!{n}" for n, b in zip(self.env_inputs, r)]
            edges.setdefault((l, m), []).append(" ".join(cond))
        for (l, r), m in sorted(self.pass_.items()):
            cond = ["pass"] + [n if b else f"!{n}" for n, b in zip(self.env_inputs, r)]
            edges.setdefault((l, m), []).append(" ".join(cond))
        for (l, m), conds in sorted(edges.items()):
            text = "\\n".join(conds)
            lines.append(f'  s{l} -> s{m} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def token_ring_process(env_inputs: Sequence[str] = ("r",), grant: str | None = "g") -> ProcessLts:
    """Two-state token forwarder: idle until the token arrives, then grant and send."""
    outputs = tuple([grant] if grant else []) + ("tok", "send")
    on = frozenset(outputs)
    inputs = list(itertools.product((False, True), repeat=len(env_inputs)))
    step, pass_ = {}, {}
    for r in inputs:
        step[(0, r, False)] = 0
        step[(0, r, True)] = 1
        step[(1, r, False)] = 1
        step[(1, r, True)] = 1
        pass_[(1, r)] = 0
    return ProcessLts((0, 1), 1, 0, tuple(env_inputs), outputs, {0: frozenset(), 1: on}, step, pass_)


# --------------------------------------------------------------------------
# Compositions


@dataclass
class GlobalLts:
    """Explicit reachable composition.

    ``transitions[t]`` lists ``(env_letter, t')`` pairs; an env letter is the
    frozenset of environment atoms that hold (requests and ``sched_j``).
    """

    nodes: tuple[int, ...]
    hubs: frozenset[int]
    preds: dict[int, tuple[int, ...]]
    states: list[tuple[int, ...]]
    initial: int
    labels: list[frozenset[str]]
    transitions: list[list[tuple[frozenset[str], int]]]
    atoms: frozenset[str]
    env_atoms: frozenset[str]

    def token_holders(self, t: int) -> list[int]:
        """Nodes holding the token: sites by their ``tok`` output, hubs by state."""
        out = []
        for k, x in enumerate(self.nodes):
            if x in self.hubs:
                if self.states[t][k] != HUB_WAIT:
                    out.append(x)
            elif f"tok_{x}" in self.labels[t]:
                out.append(x)
        return out


def _env_letters(names: Sequence[str], sites: Sequence[int], nodes: Sequence[int]):
    keys = [f"{n}_{p}" for p in sites for n in names]
    for s in nodes:
        for vals in itertools.product((False, True), repeat=len(keys)):
            yield s, dict(zip(keys, vals))


def _compose(
    p: ProcessLts,
    nodes: Sequence[int],
    hubs: frozenset[int],
    preds: Mapping[int, Sequence[int]],
    initial: tuple[int, ...],
    limit: int,
) -> GlobalLts:
    nodes = tuple(nodes)
    pos = {x: k for k, x in enumerate(nodes)}
    sites = [x for x in nodes if x not in hubs]
    names = p.env_inputs

    def sending(state, x) -> bool:
        l = state[pos[x]]
        return l == HUB_SEND if x in hubs else p.sends(l)

    def label(state) -> frozenset[str]:
        out = set()
        for x in nodes:
            l = state[pos[x]]
            if x in hubs:
                if l != HUB_WAIT:
                    out.add(f"tok_{x}")
                if l == HUB_SEND:
                    out.add(f"send_{x}")
            else:
                out |= {f"{o}_{x}" for o in p.labels[l]}
        return frozenset(out)

    letters = list(_env_letters(names, sites, nodes))
    index = {initial: 0}
    states = [initial]
    transitions: list[list] = []
    k = 0
    while k < len(states):
        state = states[k]
        k += 1
        outs = []
        for s, env in letters:
            new = list(state)
            senders = [x for x in preds[s] if x != s and sending(state, x)]
            incoming = bool(senders)
            if s in hubs:
                if state[pos[s]] == HUB_WAIT:
                    new[pos[s]] = HUB_GOT if incoming else HUB_WAIT
                else:
                    new[pos[s]] = HUB_SEND
            else:
                r = tuple(env[f"{n}_{s}"] for n in names)
                if s in preds[s]:
                    incoming = incoming or sending(state, s)
                new[pos[s]] = p.step[(state[pos[s]], r, incoming)]
            for x in senders:
                if x in hubs:
                    new[pos[x]] = HUB_WAIT
                else:
                    r = tuple(env[f"{n}_{x}"] for n in names)
                    new[pos[x]] = p.pass_[(state[pos[x]], r)]
            new_t = tuple(new)
            if new_t not in index:
                if len(states) >= limit:
                    raise StateLimitError(f"composition exceeds {limit} states")
                index[new_t] = len(states)
                states.append(new_t)
            letter = frozenset([f"{SCHED}_{s}"] + [key for key, v in env.items() if v])
            outs.append((letter, index[new_t]))
        transitions.append(outs)
    labels = [label(s) for s in states]
    env_atoms = frozenset(f"{SCHED}_{x}" for x in nodes) | frozenset(
        f"{n}_{x}" for x in sites for n in names
    )
    out_atoms = frozenset(f"{o}_{x}" for x in sites for o in p.outputs) | frozenset(
        f"{o}_{h}" for h in hubs for o in ("tok", "send")
    )
    return GlobalLts(
        nodes, frozenset(hubs), {x: tuple(preds[x]) for x in nodes}, states, 0, labels,
        transitions, env_atoms | out_atoms, env_atoms,
    )


def compose_ring(p: ProcessLts, n: int, limit: int = 10**7) -> GlobalLts:
    """Ring of ``n`` copies; process 1 starts with the token.

    With ``n = 1`` the single process is its own predecessor and reads its
    own ``send`` output; no token passing move happens.
    """
    if n < 1:
        raise ValueError("ring size must be at least 1")
    nodes = tuple(range(1, n + 1))
    preds = {i: ((i - 2) % n + 1,) for i in nodes}
    init = (p.init_token,) + (p.init_idle,) * (n - 1)
    return _compose(p, nodes, frozenset(), preds, init, limit)


def compose_network(p: ProcessLts, graph, holder: int | None = None, limit: int = 10**7) -> GlobalLts:
    """Network composition; hub nodes of ``graph`` run the fixed forwarder.

    ``graph`` is a :class:`~parasynth.topology.NetworkGraph` or a connection
    topology (whose representative is used).  The token starts at
    ``holder`` (default: the smallest non-hub node).
    """
    g = getattr(graph, "representative", graph)
    if not g.nodes or not g.edges:
        raise ValueError("network graph has no edges")
    hubs = frozenset(g.hubs)
    sites = [x for x in g.nodes if x not in hubs]
    if not sites:
        raise ValueError("network has no synthesized processes")
    holder = sites[0] if holder is None else holder
    preds = {x: tuple(g.predecessors(x)) for x in g.nodes}
    init = tuple(
        (HUB_GOT if x == holder else HUB_WAIT) if x in hubs else (p.init_token if x == holder else p.init_idle)
        for x in g.nodes
    )
    return _compose(p, g.nodes, hubs, preds, init, limit)


def exactly_one_token(g: GlobalLts) -> list[int]:
    """Reachable states violating the exactly-one-token property."""
    return [t for t in range(len(g.states)) if len(g.token_holders(t)) != 1]


def unscheduled_invariance_violations(g: GlobalLts) -> list[tuple[int, frozenset, int]]:
    """Transitions in which a node moved although it was neither scheduled
    nor passing the token to the scheduled node."""
    pos = {x: k for k, x in enumerate(g.nodes)}
    bad = []
    for t, outs in enumerate(g.transitions):
        for letter, u in outs:
            s = next(int(a.split("_", 1)[1]) for a in letter if a.startswith(f"{SCHED}_"))
            allowed = {s} | {x for x in g.preds[s] if f"send_{x}" in g.labels[t]}
            for x in g.nodes:
                if x not in allowed and g.states[t][pos[x]] != g.states[u][pos[x]]:
                    bad.append((t, letter, u))
                    break
    return bad


# --------------------------------------------------------------------------
# Model checking


@dataclass
class LassoCounterexample:
    """A violating run: ``stem`` then ``loop`` forever.

    Each entry is ``(global state, letter)`` where the letter is the full
    valuation read in that state (outputs plus the relevant environment
    atoms).
    """

    stem: list[tuple[int, frozenset[str]]]
    loop: list[tuple[int, frozenset[str]]]
    formula: Formula

    def words(self) -> tuple[list[frozenset[str]], list[frozenset[str]]]:
        return [l for _, l in self.stem], [l for _, l in self.loop]

    def describe(self, g: GlobalLts | None = None) -> str:
        def row(t, letter):
            st = f" {g.states[t]}" if g is not None else ""
            return f"  t{t}{st}: {' '.join(sorted(letter)) or '-'}"

        lines = [f"violated: {to_string(self.formula)}", "stem:"]
        lines += [row(t, l) for t, l in self.stem] or ["  (empty)"]
        lines.append("loop:")
        lines += [row(t, l) for t, l in self.loop]
        return "\n".join(lines)


@dataclass
class Holds:
    conjuncts: int = 0
    product_states: int = 0

    def __bool__(self) -> bool:
        return True


def model_check(g: GlobalLts, f: Formula, limit: int = 10**7) -> Holds | LassoCounterexample:
    """Check ``g`` against ``f``; returns :class:`Holds` or a counterexample lasso.

    Each top-level conjunct is checked separately against the Büchi
    automaton of its negation by nested depth-first search.
    """
    undeclared = atom_keys(f) - g.atoms
    if undeclared:
        raise SpecError(f"formula mentions undeclared atoms: {sorted(undeclared)}")
    total = 0
    parts = conjuncts(f)
    groups = letter_groups(g)
    for c in parts:
        res = _check_conjunct(g, c, limit - total, groups)
        if isinstance(res, LassoCounterexample):
            return res
        total += res
    return Holds(len(parts), total)


def letter_groups(g: GlobalLts) -> list[ExclusiveGroup]:
    """Exclusivity facts true of every letter of ``g``.

    Exactly one node is scheduled by construction; token exclusivity is
    read off the reachable states.  Passing these to the automaton
    construction only prunes letters the composition never produces.
    """
    groups = [ExclusiveGroup(frozenset(f"{SCHED}_{x}" for x in g.nodes), exactly=True)]
    counts = [len(g.token_holders(t)) for t in range(len(g.states))]
    if counts and max(counts) <= 1:
        groups.append(ExclusiveGroup(frozenset(f"tok_{x}" for x in g.nodes), exactly=min(counts) == 1))
    return groups


def _check_conjunct(g: GlobalLts, c: Formula, limit: int, groups: Sequence[ExclusiveGroup] = ()):
    nba = ltl_to_nba(Not(c), groups)
    relevant_env = atom_keys(c) & g.env_atoms
    succ_nba = nba.successors()
    cache: dict[int, list[tuple[frozenset[str], int]]] = {}

    def moves(t: int):
        if t not in cache:
            seen = set()
            out = []
            for letter, u in g.transitions[t]:
                key = (letter & relevant_env, u)
                if key not in seen:
                    seen.add(key)
                    out.append((g.labels[t] | key[0], u))
            cache[t] = out
        return cache[t]

    def successors(node):
        t, q = node
        for letter, u in moves(t):
            for lab, r in succ_nba[q]:
                if label_holds(lab, letter):
                    yield letter, (u, r)

    start = (g.initial, nba.initial)
    visited = {start}
    flagged: set = set()
    # outer DFS: stack entries are (node, letter used to enter, iterator)
    stack = [(start, None, successors(start))]
    while stack:
        node, entered, it = stack[-1]
        advanced = False
        for letter, nxt in it:
            if nxt not in visited:
                if len(visited) >= limit:
                    raise StateLimitError(f"product exceeds {limit} states")
                visited.add(nxt)
                stack.append((nxt, letter, successors(nxt)))
                advanced = True
                break
        if advanced:
            continue
        stack.pop()
        if node[1] in nba.accepting:
            cycle = _inner_dfs(node, successors, flagged)
            if cycle is not None:
                path = [(n, l) for n, l, _ in stack] + [(node, entered)]
                # letters are read leaving each node: shift by one
                stem = [(path[k][0][0], path[k + 1][1]) for k in range(len(path) - 1)]
                return LassoCounterexample(stem, cycle, c)
    return len(visited)


def _inner_dfs(seed, successors, flagged):
    """Search a cycle back to ``seed``; returns the loop as (state, letter) pairs."""
    stack = [(seed, successors(seed))]
    letters: list = []
    on_path = [seed]
    while stack:
        node, it = stack[-1]
        advanced = False
        for letter, nxt in it:
            if nxt == seed:
                loop_nodes = on_path
                loop_letters = letters + [letter]
                return [(n[0], l) for n, l in zip(loop_nodes, loop_letters)]
            if nxt not in flagged:
                flagged.add(nxt)
                stack.append((nxt, successors(nxt)))
                letters.append(letter)
                on_path.append(nxt)
                advanced = True
                break
        if not advanced:
            stack.pop()
            if letters:
                letters.pop()
            on_path.pop()
    return None


def behaviourally_equivalent(p: ProcessLts, q: ProcessLts, n: int) -> bool:
    """Whether some bijection between the processes' states maps the ring of
    ``n`` copies of ``p`` onto the ring of ``n`` copies of ``q``, preserving
    labels and transitions."""
    gp, gq = compose_ring(p, n), compose_ring(q, n)
    if len(gp.states) != len(gq.states):
        return False
    used_p = sorted({l for s in gp.states for l in s})
    used_q = sorted({l for s in gq.states for l in s})
    if len(used_p) != len(used_q):
        return False
    target = {
        (gq.states[t], letter, gq.states[u])
        for t, outs in enumerate(gq.transitions) for letter, u in outs
    }
    for perm in itertools.permutations(used_q):
        sigma = dict(zip(used_p, perm))
        if any(p.labels[l] != q.labels[sigma[l]] for l in used_p):
            continue
        if sigma.get(p.init_token) != q.init_token:
            continue
        mapped = {
            (tuple(sigma[l] for l in gp.states[t]), letter, tuple(sigma[l] for l in gp.states[u]))
            for t, outs in enumerate(gp.transitions) for letter, u in outs
        }
        if mapped == target:
            return True
    return False
