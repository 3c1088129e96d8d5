"""LTL\\X to Büchi automata, co-Büchi dualization, and lasso oracles.

Automata are transition labeled: reading a letter moves from a state along
an edge whose label (a conjunction of literals) the letter satisfies, and
acceptance is decided by the states entered.  Labels are frozensets of
``(atom, polarity)`` pairs; the empty label is ``true``.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .ltl import (
    And,
    Atom,
    Const,
    Finally,
    Formula,
    Globally,
    Iff,
    Implies,
    Not,
    Or,
    Until,
    WeakUntil,
    atom_keys,
)

Label = frozenset  # frozenset[tuple[str, bool]]
Letter = frozenset  # frozenset[str] of atoms that are true

TRUE_LABEL: Label = frozenset()

# --------------------------------------------------------------------------
# Negation normal form over tuples: ('true',) ('false',) ('lit', key, pos)
# ('and', a, b) ('or', a, b) ('U', a, b) ('R', a, b)

T = ("true",)
F = ("false",)


def _and(a, b):
    if a == F or b == F:
        return F
    if a == T:
        return b
    if b == T or a == b:
        return a
    return ("and",) + tuple(sorted((a, b)))


def _or(a, b):
    if a == T or b == T:
        return T
    if a == F:
        return b
    if b == F or a == b:
        return a
    return ("or",) + tuple(sorted((a, b)))


def _until(a, b):
    if b in (T, F):
        return b
    if a == F:
        return b
    return ("U", a, b)


def _release(a, b):
    if b in (T, F):
        return b
    if a == T:
        return b
    return ("R", a, b)


def nnf(f: Formula, negate: bool = False):
    """Negation normal form of ``f`` (or of its negation)."""
    if isinstance(f, Const):
        return T if f.value != negate else F
    if isinstance(f, Atom):
        return ("lit", f.key, not negate)
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        op = _or if negate else _and
        return op(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Or):
        op = _and if negate else _or
        return op(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Implies):
        if negate:
            return _and(nnf(f.left), nnf(f.right, True))
        return _or(nnf(f.left, True), nnf(f.right))
    if isinstance(f, Iff):
        a, na = nnf(f.left), nnf(f.left, True)
        b, nb = nnf(f.right), nnf(f.right, True)
        if negate:
            return _or(_and(a, nb), _and(na, b))
        return _or(_and(a, b), _and(na, nb))
    if isinstance(f, Globally):
        return _until(T, nnf(f.arg, True)) if negate else _release(F, nnf(f.arg))
    if isinstance(f, Finally):
        return _release(F, nnf(f.arg, True)) if negate else _until(T, nnf(f.arg))
    if isinstance(f, Until):
        if negate:
            return _release(nnf(f.left, True), nnf(f.right, True))
        return _until(nnf(f.left), nnf(f.right))
    if isinstance(f, WeakUntil):
        # a W b == b R (a | b)
        if negate:
            nb = nnf(f.right, True)
            return _until(nb, _and(nnf(f.left, True), nb))
        b = nnf(f.right)
        return _release(b, _or(nnf(f.left), b))
    raise TypeError(f"not an LTL\\X formula: {f!r}")


def _top_disjuncts(g) -> list:
    if g[0] == "or":
        return _top_disjuncts(g[1]) + _top_disjuncts(g[2])
    return [g]


# --------------------------------------------------------------------------
# Automata


@dataclass(frozen=True)
class ExclusiveGroup:
    """Atoms of which at most one (or, if ``exactly``, exactly one) holds."""

    atoms: frozenset[str]
    exactly: bool = False


@dataclass(frozen=True)
class Nba:
    states: tuple[int, ...]
    initial: int
    edges: tuple[tuple[int, Label, int], ...]
    accepting: frozenset[int]
    atoms: tuple[str, ...]

    def successors(self) -> dict[int, list[tuple[Label, int]]]:
        out: dict[int, list[tuple[Label, int]]] = {q: [] for q in self.states}
        for q, lab, r in self.edges:
            out[q].append((lab, r))
        return out


@dataclass(frozen=True)
class Ucw:
    states: tuple[int, ...]
    initial: int
    edges: tuple[tuple[int, Label, int], ...]
    rejecting: frozenset[int]
    atoms: tuple[str, ...]
    sink: int | None = None

    def successors(self) -> dict[int, list[tuple[Label, int]]]:
        out: dict[int, list[tuple[Label, int]]] = {q: [] for q in self.states}
        for q, lab, r in self.edges:
            out[q].append((lab, r))
        return out


def label_holds(label: Label, letter: Letter) -> bool:
    return all((k in letter) == pos for k, pos in label)


def label_string(label: Label) -> str:
    if not label:
        return "true"
    return " & ".join(k if pos else f"!{k}" for k, pos in sorted(label))


_KIND_RANK = {"false": 0, "lit": 1, "true": 2, "and": 3, "R": 4, "or": 5, "U": 6}


def _expansion_order(f):
    return (_KIND_RANK[f[0]], f)


def _tableau(root, groups: Sequence[ExclusiveGroup]):
    """GPVW expansion; returns node (old, next) keys and incoming sets."""
    init = -1
    nodes: list[tuple[frozenset, frozenset]] = []
    index: dict[tuple[frozenset, frozenset], int] = {}
    incoming: dict[int, set[int]] = {}
    group_of: dict[str, list[ExclusiveGroup]] = defaultdict(list)
    for g in groups:
        for a in g.atoms:
            group_of[a].append(g)

    def consistent(lit, old) -> bool:
        _, key, pos = lit
        if ("lit", key, not pos) in old:
            return False
        for g in group_of.get(key, ()):
            if pos:
                if any(("lit", o, True) in old for o in g.atoms if o != key):
                    return False
            elif g.exactly:
                if all(("lit", o, False) in old for o in g.atoms if o != key):
                    return False
        return True

    stack = [(frozenset({init}), frozenset({root}), frozenset(), frozenset())]
    while stack:
        inc, new, old, nxt = stack.pop()
        if not new:
            key = (old, nxt)
            if key in index:
                incoming[index[key]] |= inc
                continue
            nid = len(nodes)
            nodes.append(key)
            index[key] = nid
            incoming[nid] = set(inc)
            stack.append((frozenset({nid}), nxt, frozenset(), frozenset()))
            continue
        # literals first, so that contradictory branches die before they fork
        eta = min(new, key=_expansion_order)
        new = new - {eta}
        if eta in old:
            stack.append((inc, new, old, nxt))
            continue
        kind = eta[0]
        old2 = old | {eta}
        if kind == "false":
            continue
        if kind == "true":
            stack.append((inc, new, old2, nxt))
        elif kind == "lit":
            if consistent(eta, old):
                stack.append((inc, new, old2, nxt))
        elif kind == "and":
            stack.append((inc, new | ({eta[1], eta[2]} - old), old2, nxt))
        elif kind == "or":
            stack.append((inc, new | ({eta[2]} - old), old2, nxt))
            stack.append((inc, new | ({eta[1]} - old), old2, nxt))
        elif kind == "U":
            stack.append((inc, new | ({eta[2]} - old), old2, nxt))
            stack.append((inc, new | ({eta[1]} - old), old2, nxt | {eta}))
        elif kind == "R":
            stack.append((inc, new | ({eta[1], eta[2]} - old), old2, nxt))
            stack.append((inc, new | ({eta[2]} - old), old2, nxt | {eta}))
        else:  # pragma: no cover
            raise AssertionError(kind)
    return nodes, incoming


def _degeneralize(nodes, incoming):
    """Counter construction; returns (edges, accepting) over (node, level) pairs."""
    untils = sorted({g for old, _ in nodes for g in old if g[0] == "U"})
    sets = []
    for u in untils:
        members = frozenset(i for i, (old, _) in enumerate(nodes) if u not in old or u[2] in old)
        if len(members) < len(nodes):
            sets.append(members)
    m = len(sets)
    labels = [
        frozenset((g[1], g[2]) for g in old if g[0] == "lit") for old, _ in nodes
    ]
    succ: dict[int, list[int]] = defaultdict(list)
    for n in range(len(nodes)):
        for p in sorted(incoming[n]):
            succ[p].append(n)

    def advance(level: int, n: int) -> int:
        j = 0 if level == m else level
        while j < m and n in sets[j]:
            j += 1
        return j

    start = (-1, 0)
    seen = {start: 0}
    order = [start]
    edges = []
    queue = deque([start])
    while queue:
        p, lvl = queue.popleft()
        for n in succ[p]:
            tgt = (n, advance(lvl, n))
            if tgt not in seen:
                seen[tgt] = len(order)
                order.append(tgt)
                queue.append(tgt)
            edges.append((seen[(p, lvl)], labels[n], seen[tgt]))
    accepting = {seen[s] for s in order if s[1] == m and s != start}
    return len(order), edges, accepting


def _live_states(count, initial, edges, accepting) -> set[int]:
    """States reachable from ``initial`` that can reach an accepting cycle."""
    g = nx.DiGraph()
    g.add_nodes_from(range(count))
    g.add_edges_from((q, r) for q, _, r in edges)
    reach = nx.descendants(g, initial) | {initial}
    good = set()
    for comp in nx.strongly_connected_components(g.subgraph(reach)):
        if comp & accepting and (len(comp) > 1 or g.has_edge(next(iter(comp)), next(iter(comp)))):
            good |= comp
    live = set(good)
    for s in good:
        live |= nx.ancestors(g, s)
    return (live & reach) | {initial}


def _drop_subsumed(edges) -> list:
    by_pair: dict[tuple[int, int], list[Label]] = defaultdict(list)
    for q, lab, r in edges:
        by_pair[(q, r)].append(lab)
    out = []
    for (q, r), labs in by_pair.items():
        labs = sorted(set(labs), key=lambda l: (len(l), sorted(l)))
        kept: list[Label] = []
        for lab in labs:
            if not any(k <= lab for k in kept):
                kept.append(lab)
        out.extend((q, lab, r) for lab in kept)
    return out


def _quotient(count, initial, edges, accepting):
    """Merge bisimilar states (same acceptance, same labelled successor blocks)."""
    block = {q: int(q in accepting) for q in range(count)}
    succ: dict[int, list[tuple[Label, int]]] = defaultdict(list)
    for q, lab, r in edges:
        succ[q].append((lab, r))
    nblocks = len(set(block.values()))
    while True:
        sigs = {}
        new_block = {}
        for q in range(count):
            sig = (block[q], frozenset((lab, block[r]) for lab, r in succ[q]))
            new_block[q] = sigs.setdefault(sig, len(sigs))
        block = new_block
        if len(sigs) == nblocks:
            break
        nblocks = len(sigs)
    qedges = {(block[q], lab, block[r]) for q, lab, r in edges}
    return block, qedges


def _canonical(initial, edges, accepting, atoms) -> Nba:
    """Renumber states breadth-first from the initial state."""
    succ: dict[int, list[tuple[Label, int]]] = defaultdict(list)
    for q, lab, r in edges:
        succ[q].append((lab, r))
    ids = {initial: 0}
    queue = deque([initial])
    while queue:
        q = queue.popleft()
        for lab, r in sorted(succ[q], key=lambda e: (sorted(e[0]), e[1])):
            if r not in ids:
                ids[r] = len(ids)
                queue.append(r)
    new_edges = sorted(
        ((ids[q], lab, ids[r]) for q, lab, r in edges if q in ids),
        key=lambda e: (e[0], e[2], sorted(e[1])),
    )
    return Nba(
        states=tuple(range(len(ids))),
        initial=0,
        edges=tuple(new_edges),
        accepting=frozenset(ids[q] for q in accepting if q in ids),
        atoms=atoms,
    )


def ltl_to_nba(f: Formula, exclusive: Sequence[ExclusiveGroup] = ()) -> Nba:
    """Büchi automaton for the words satisfying ``f``.

    ``exclusive`` declares atom groups that never hold simultaneously in the
    words of interest; letters violating them are pruned from the automaton,
    which is only sound for callers that never produce such letters.
    """
    atoms = tuple(sorted(atom_keys(f)))
    root = nnf(f)
    count = 1
    edges: list[tuple[int, Label, int]] = []
    accepting: set[int] = set()
    for part in _top_disjuncts(root):
        if part == F:
            continue
        nodes, incoming = _tableau(part, exclusive)
        n, sub_edges, sub_acc = _degeneralize(nodes, incoming)
        offset = count - 1  # local state 0 is the shared initial state
        ren = lambda s: 0 if s == 0 else s + offset
        edges.extend((ren(q), lab, ren(r)) for q, lab, r in sub_edges)
        accepting |= {ren(s) for s in sub_acc}
        count += n - 1
    live = _live_states(count, 0, edges, accepting)
    edges = [e for e in edges if e[0] in live and e[2] in live]
    edges = _drop_subsumed(edges)
    block, qedges = _quotient(count, 0, edges, accepting & live)
    qacc = {block[q] for q in accepting & live}
    qedges = _drop_subsumed(qedges)
    return _canonical(block[0], qedges, qacc, atoms)


def _universal_sinks(a: Nba) -> set[int]:
    return {
        q for q, lab, r in a.edges if q == r and not lab and q in a.accepting
    }


def nba_to_ucw(a: Nba) -> Ucw:
    """Dualize the automaton of a negated property into a co-Büchi automaton.

    Accepting states become rejecting.  Accepting states with an
    unconditional self-loop accept every continuation, so they collapse into
    a single absorbing rejecting sink.
    """
    sinks = _universal_sinks(a)
    if not sinks:
        return Ucw(a.states, a.initial, a.edges, a.accepting, a.atoms)
    rep = min(sinks)
    ren = lambda q: rep if q in sinks else q
    edges = {(ren(q), lab, ren(r)) for q, lab, r in a.edges if q not in sinks}
    edges.add((rep, TRUE_LABEL, rep))
    nba = _canonical(
        ren(a.initial),
        _drop_subsumed(edges),
        {ren(q) for q in a.accepting},
        a.atoms,
    )
    sink = next(q for q, lab, r in nba.edges if q == r and not lab and q in nba.accepting)
    return Ucw(nba.states, nba.initial, nba.edges, nba.accepting, nba.atoms, sink)


def ltl_to_ucw(f: Formula, exclusive: Sequence[ExclusiveGroup] = ()) -> Ucw:
    """Co-Büchi automaton accepting exactly the words satisfying ``f``."""
    ucw = nba_to_ucw(ltl_to_nba(Not(f), exclusive))
    # keep the property's own atoms even if the negation pruned some away
    return Ucw(ucw.states, ucw.initial, ucw.edges, ucw.rejecting, tuple(sorted(atom_keys(f))), ucw.sink)


def to_dot(a: Nba | Ucw, name: str = "automaton") -> str:
    marked = a.accepting if isinstance(a, Nba) else a.rejecting
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  init [shape=point, label=""];']
    for q in a.states:
        shape = "doublecircle" if q in marked else "circle"
        text = "⊥" if isinstance(a, Ucw) and q == a.sink else str(q)
        lines.append(f'  q{q} [shape={shape}, label="{text}"];')
    lines.append(f"  init -> q{a.initial};")
    for q, lab, r in a.edges:
        lines.append(f'  q{q} -> q{r} [label="{label_string(lab)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Lasso oracles


def _accepting_set(a: Nba | Ucw) -> frozenset[int]:
    return a.accepting if isinstance(a, Nba) else a.rejecting


def _buchi_lasso(a: Nba | Ucw, stem: Sequence[Letter], loop: Sequence[Letter]) -> bool:
    """Some run on ``stem loop^ω`` visits the marked states infinitely often."""
    if not loop:
        raise ValueError("loop must be nonempty")
    word = [frozenset(x) for x in stem] + [frozenset(x) for x in loop]
    s, total = len(stem), len(stem) + len(loop)
    marked = _accepting_set(a)
    succ = a.successors()
    nxt = lambda p: p + 1 if p + 1 < total else s
    g = nx.DiGraph()
    start = (a.initial, 0)
    g.add_node(start)
    stack = [start]
    while stack:
        q, p = stack.pop()
        for lab, r in succ[q]:
            if label_holds(lab, word[p]):
                node = (r, nxt(p))
                if node not in g:
                    stack.append(node)
                g.add_edge((q, p), node)
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1:
            v = next(iter(comp))
            if not g.has_edge(v, v):
                continue
        if any(q in marked for q, _ in comp):
            return True
    return False


def lasso_accepts(a: Nba | Ucw, stem: Sequence[Iterable[str]], loop: Sequence[Iterable[str]]) -> bool:
    """Acceptance of the ultimately periodic word ``stem loop^ω``.

    Letters are collections of the atoms that hold.  An NBA accepts when some
    run is Büchi accepting; a UCW accepts when no run visits rejecting states
    infinitely often.
    """
    stem = [frozenset(x) for x in stem]
    loop = [frozenset(x) for x in loop]
    hit = _buchi_lasso(a, stem, loop)
    return hit if isinstance(a, Nba) else not hit


# Semantic oracle: fixpoints over lasso positions


def _eval_positions(f: Formula, val: Mapping[str, np.ndarray], s: int, total: int) -> np.ndarray:
    """Truth of ``f`` at every position, as a boolean array of shape (N, total)."""
    n = next(iter(val.values())).shape[0] if val else 1
    succ_idx = np.array([p + 1 if p + 1 < total else s for p in range(total)])

    def shift(z: np.ndarray) -> np.ndarray:
        return z[:, succ_idx]

    def ev(g: Formula) -> np.ndarray:
        if isinstance(g, Const):
            return np.full((n, total), g.value, dtype=bool)
        if isinstance(g, Atom):
            if g.key in val:
                return val[g.key]
            return np.zeros((n, total), dtype=bool)
        if isinstance(g, Not):
            return ~ev(g.arg)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Implies):
            return ~ev(g.left) | ev(g.right)
        if isinstance(g, Iff):
            return ev(g.left) == ev(g.right)
        if isinstance(g, Globally):
            a = ev(g.arg)
            return _fix(lambda z: a & shift(z), greatest=True)
        if isinstance(g, Finally):
            a = ev(g.arg)
            return _fix(lambda z: a | shift(z), greatest=False)
        if isinstance(g, (Until, WeakUntil)):
            a, b = ev(g.left), ev(g.right)
            return _fix(lambda z: b | (a & shift(z)), greatest=isinstance(g, WeakUntil))
        raise TypeError(f"not an LTL\\X formula: {g!r}")

    def _fix(step, greatest: bool) -> np.ndarray:
        z = np.full((n, total), greatest, dtype=bool)
        for _ in range(total + 1):
            z2 = step(z)
            if np.array_equal(z2, z):
                break
            z = z2
        return z

    return ev(f)


def eval_ltl_on_lasso(f: Formula, stem: Sequence[Iterable[str]], loop: Sequence[Iterable[str]]) -> bool:
    """Direct LTL semantics on ``stem loop^ω`` (independent of the automata)."""
    if not loop:
        raise ValueError("loop must be nonempty")
    word = [frozenset(x) for x in stem] + [frozenset(x) for x in loop]
    keys = atom_keys(f)
    val = {k: np.array([[k in letter for letter in word]]) for k in keys}
    return bool(_eval_positions(f, val, len(stem), len(word))[0, 0])


def eval_ltl_batch(f: Formula, atoms: Sequence[str], stems: np.ndarray, loops: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on every (stem, loop) combination.

    ``stems`` has shape (S, s) and ``loops`` (L, l); entries are letters
    encoded as bitmasks over ``atoms``.  Returns a boolean (S, L) matrix.
    """
    S, s = stems.shape
    L, l = loops.shape
    total = s + l
    word = np.concatenate(
        [np.repeat(stems, L, axis=0), np.tile(loops, (S, 1))], axis=1
    )
    val = {k: ((word >> bit) & 1).astype(bool) for bit, k in enumerate(atoms)}
    return _eval_positions(f, val, s, total)[:, 0].reshape(S, L)


class LassoMatrices:
    """Batch lasso acceptance for one automaton over a fixed atom alphabet.

    Per letter, a boolean transition matrix over (state, visited-mark) pairs
    is built once; words are then handled as matrix products.
    """

    def __init__(self, a: Nba | Ucw, atoms: Sequence[str]):
        self.a = a
        self.atoms = tuple(atoms)
        self.q = len(a.states)
        marked = _accepting_set(a)
        nletters = 1 << len(self.atoms)
        q = self.q
        step = np.zeros((nletters, q, q), dtype=bool)
        for letter in range(nletters):
            true_atoms = frozenset(k for b, k in enumerate(self.atoms) if letter >> b & 1)
            for src, lab, dst in a.edges:
                if label_holds(lab, true_atoms):
                    step[letter, src, dst] = True
        flagged = np.zeros((nletters, 2 * q, 2 * q), dtype=bool)
        mark = np.array([s in marked for s in range(q)])
        for f in (0, 1):
            rows = slice(f * q, (f + 1) * q)
            # an unmarked target keeps the flag, a marked one sets it
            flagged[:, rows, rows] |= step & ~mark[None, None, :]
            flagged[:, rows, q:] |= step & mark[None, None, :]
        self.step = step
        self.flagged = flagged

    @staticmethod
    def _words_product(mats: np.ndarray, words: np.ndarray) -> np.ndarray:
        out = mats[words[:, 0]].astype(np.float32)
        for j in range(1, words.shape[1]):
            out = np.matmul(out, mats[words[:, j]].astype(np.float32)) > 0
            out = out.astype(np.float32)
        return out > 0

    def stem_sets(self, stems: np.ndarray) -> np.ndarray:
        """Reachable state sets after each stem, shape (S, q)."""
        start = np.zeros(self.q, dtype=bool)
        start[self.a.initial] = True
        cur = np.repeat(start[None, :], stems.shape[0], axis=0)
        for j in range(stems.shape[1]):
            m = self.step[stems[:, j]].astype(np.float32)
            cur = np.einsum("nq,nqr->nr", cur.astype(np.float32), m) > 0
        return cur

    def loop_hits(self, loops: np.ndarray) -> np.ndarray:
        """States from which a marked cycle through the loop exists, shape (L, q)."""
        q = self.q
        w = self._words_product(self.flagged, loops)
        rel = w[:, :q, :q] | w[:, :q, q:]
        rel_mark = w[:, :q, q:]
        closure = rel | np.eye(q, dtype=bool)[None]
        for _ in range(max(1, int(np.ceil(np.log2(q + 1))))):
            c = closure.astype(np.float32)
            closure = np.matmul(c, c) > 0
        # u lies on a marked cycle: u -mark-> v ->* u
        on_cycle = (rel_mark & np.transpose(closure, (0, 2, 1))).any(axis=2)
        return (closure & on_cycle[:, None, :]).any(axis=2)

    def accepts(self, stems: np.ndarray, loops: np.ndarray) -> np.ndarray:
        """Acceptance matrix of shape (S, L) with the automaton's own semantics."""
        sets = self.stem_sets(stems)
        hits = self.loop_hits(loops)
        buchi = (sets.astype(np.float32) @ hits.T.astype(np.float32)) > 0
        return buchi if isinstance(self.a, Nba) else ~buchi


def all_words(length: int, nletters: int) -> np.ndarray:
    """Every word of the given length as an int array of shape (nletters**length, length)."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*[np.arange(nletters)] * length, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
