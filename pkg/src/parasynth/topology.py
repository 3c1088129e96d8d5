"""Network graphs, connection topologies, and quantifier reductions.

A connection topology abstracts a graph relative to an ordered tuple of
distinguished *sites*.  It records, for sites x and y, whether there is a
direct edge, whether there is a path whose interior is nonempty and avoids
all sites, and whether such a path leads from a site back to itself.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import networkx as nx

from .indexed import IndexedSpec


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    hubs: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(set(self.nodes))))
        object.__setattr__(self, "edges", frozenset(self.edges))
        if not self.nodes:
            raise TopologyError("graph has no nodes")
        known = set(self.nodes)
        for a, b in self.edges:
            if a == b:
                raise TopologyError(f"self-loop on node {a}")
            if a not in known or b not in known:
                raise TopologyError(f"edge ({a}, {b}) mentions an undeclared node")
        if not self.hubs <= known:
            raise TopologyError("hub markers must name graph nodes")

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if n not in self.hubs)

    def successors(self, n: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == n)

    def predecessors(self, n: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == n)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def validate(self) -> "NetworkGraph":
        """Require strong connectivity so the token can reach every node."""
        if len(self.nodes) < 2:
            raise TopologyError("a token-passing network needs at least two nodes")
        if not nx.is_strongly_connected(self.to_networkx()):
            raise TopologyError("graph is not strongly connected; some node can never receive the token")
        return self

    def to_text(self) -> str:
        lines = [f"node {n}" for n in self.nodes]
        lines += [f"edge {a} {b}" for a, b in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def ring_graph(n: int) -> NetworkGraph:
    if n < 2:
        raise TopologyError("a ring needs at least two nodes (n=1 would be a self-loop)")
    return NetworkGraph(tuple(range(1, n + 1)), frozenset((i, i % n + 1) for i in range(1, n + 1)))


def prio_ring_graph(n: int = 8, shortcut_from: int = 5, shortcut_to: int = 1) -> NetworkGraph:
    """Directed ring ``1 -> ... -> n -> 1`` plus one shortcut edge."""
    ring = ring_graph(n)
    return NetworkGraph(ring.nodes, ring.edges | {(shortcut_from, shortcut_to)})


def parse_graph(text: str) -> NetworkGraph:
    nodes: list[int] = []
    edges: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0] == "node" and len(words) == 2:
                nodes.append(int(words[1]))
                continue
            if words[0] == "edge" and len(words) == 3:
                edges.add((int(words[1]), int(words[2])))
                continue
        except ValueError:
            pass
        raise TopologyError(f"line {lineno}: expected 'node <id>' or 'edge <id> <id>', got {raw.strip()!r}")
    return NetworkGraph(tuple(nodes), frozenset(edges))


def load_graph(source: str) -> NetworkGraph:
    """A graph file path, ``ring:N`` or ``prio-ring:N:FROM:TO``."""
    if source.startswith("ring:"):
        return ring_graph(int(source.split(":", 1)[1]))
    if source.startswith("prio-ring:"):
        parts = source.split(":")
        if len(parts) != 4:
            raise TopologyError("expected prio-ring:<n>:<shortcut-from>:<shortcut-to>")
        return prio_ring_graph(int(parts[1]), int(parts[2]), int(parts[3]))
    with open(source, encoding="utf-8") as fh:
        return parse_graph(fh.read())


# --------------------------------------------------------------------------
# Connection topologies


@dataclass(frozen=True)
class ConnectivityFlags:
    """Flags over site positions ``1..k``."""

    k: int
    direct: frozenset[tuple[int, int]] = frozenset()
    via: frozenset[tuple[int, int]] = frozenset()
    self_free: frozenset[int] = frozenset()

    def sort_key(self):
        return (self.k, sorted(self.direct), sorted(self.via), sorted(self.self_free))

    def permute(self, perm: Sequence[int]) -> "ConnectivityFlags":
        """Rename site ``x`` to ``perm[x-1]``."""
        p = lambda x: perm[x - 1]
        return ConnectivityFlags(
            self.k,
            frozenset((p(a), p(b)) for a, b in self.direct),
            frozenset((p(a), p(b)) for a, b in self.via),
            frozenset(p(a) for a in self.self_free),
        )

    def relation(self) -> frozenset[tuple[int, int]]:
        """Site pairs connected through outside nodes, self-paths included."""
        return self.via | frozenset((x, x) for x in self.self_free)


@dataclass(frozen=True)
class ConnectionTopology:
    flags: ConnectivityFlags
    representative: NetworkGraph = field(compare=False, hash=False, repr=False)

    @property
    def k(self) -> int:
        return self.flags.k


def compute_flags(g: NetworkGraph, sites: Sequence[int]) -> ConnectivityFlags:
    sites = tuple(sites)
    if len(set(sites)) != len(sites):
        raise TopologyError("sites must be distinct")
    missing = set(sites) - set(g.nodes)
    if missing:
        raise TopologyError(f"sites {sorted(missing)} are not nodes of the graph")
    pos = {s: i + 1 for i, s in enumerate(sites)}
    succ = {n: g.successors(n) for n in g.nodes}
    direct, via, self_free = set(), set(), set()
    for x in sites:
        for y in succ[x]:
            if y in pos:
                direct.add((pos[x], pos[y]))
        # outside nodes reachable from x without touching a site
        seen = set()
        stack = [y for y in succ[x] if y not in pos]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(w for w in succ[v] if w not in pos and w not in seen)
        for v in seen:
            for y in succ[v]:
                if y in pos:
                    if y == x:
                        self_free.add(pos[x])
                    else:
                        via.add((pos[x], pos[y]))
    return ConnectivityFlags(len(sites), frozenset(direct), frozenset(via), frozenset(self_free))


def _maximal_bicliques(rel: frozenset[tuple[int, int]], k: int) -> list[tuple[frozenset, frozenset]]:
    out = set()
    sources = sorted({a for a, _ in rel})
    for r in range(1, len(sources) + 1):
        for A in itertools.combinations(sources, r):
            B = frozenset(b for b in range(1, k + 1) if all((a, b) in rel for a in A))
            if not B:
                continue
            A_full = frozenset(a for a in range(1, k + 1) if all((a, b) in rel for b in B))
            out.add((A_full, B))
    return sorted(out, key=lambda ab: (sorted(ab[0]), sorted(ab[1])))


def _hub_cover(flags: ConnectivityFlags) -> list[tuple[frozenset, frozenset]]:
    """Smallest set of bicliques covering the outside-path relation."""
    rel = flags.relation()
    if not rel:
        return []
    cands = _maximal_bicliques(rel, flags.k)
    for size in range(1, flags.k + 1):
        for combo in itertools.combinations(cands, size):
            covered = {(a, b) for A, B in combo for a in A for b in B}
            if covered >= rel:
                return list(combo)
    # one star per source site always works
    rows = sorted({a for a, _ in rel})
    return [(frozenset({a}), frozenset(b for x, b in rel if x == a)) for a in rows]


def representative(flags: ConnectivityFlags) -> NetworkGraph:
    """Small site-and-hub graph with exactly the given flags.

    Sites are nodes ``1..k``; each hub realizes a block of site pairs that are
    connected through outside nodes.  Hubs have no edges among themselves, so
    every hub path has exactly one interior node.
    """
    k = flags.k
    edges = set(flags.direct)
    hubs = []
    for h, (A, B) in enumerate(_hub_cover(flags), start=k + 1):
        hubs.append(h)
        edges |= {(a, h) for a in A} | {(h, b) for b in B}
    if k + len(hubs) > 2 * k:  # pragma: no cover - guarded by the star fallback
        raise AssertionError("representative exceeds 2k nodes")
    rep = NetworkGraph(tuple(range(1, k + 1 + len(hubs))), frozenset(edges), frozenset(hubs))
    if compute_flags(rep, range(1, k + 1)) != flags:  # pragma: no cover
        raise AssertionError("representative does not realize its flags")
    return rep


def topology_of(flags: ConnectivityFlags) -> ConnectionTopology:
    return ConnectionTopology(flags, representative(flags))


def connection_topology(g: NetworkGraph, sites: Sequence[int] | set[int] | frozenset[int]) -> ConnectionTopology:
    """Topology of ``g`` relative to ``sites`` (sets are taken in sorted order)."""
    if isinstance(sites, (set, frozenset)):
        sites = sorted(sites)
    if not sites:
        raise TopologyError("need at least one site")
    return topology_of(compute_flags(g, sites))


def k_topology(g: NetworkGraph, k: int) -> list[ConnectionTopology]:
    """Distinct topologies over all ordered k-tuples of nodes, canonically sorted."""
    if not 1 <= k <= len(g.nodes):
        raise TopologyError(f"k must lie in 1..{len(g.nodes)}")
    seen = {compute_flags(g, t) for t in itertools.permutations(g.nodes, k)}
    return [topology_of(f) for f in sorted(seen, key=ConnectivityFlags.sort_key)]


def _orbit(flags: ConnectivityFlags) -> set[ConnectivityFlags]:
    return {flags.permute(p) for p in itertools.permutations(range(1, flags.k + 1))}


def symmetry_reduce(cts: Iterable[ConnectionTopology], symmetric: bool) -> list[ConnectionTopology]:
    """One topology per orbit under site permutations (identity if not symmetric)."""
    cts = sorted(cts, key=lambda c: c.flags.sort_key())
    if not symmetric:
        return cts
    present = {c.flags for c in cts}
    kept, covered = [], set()
    for c in cts:
        if c.flags in covered:
            continue
        orbit = _orbit(c.flags)
        covered |= orbit
        kept.append(c)
    assert all(c.flags in present for c in kept)
    return kept


def expand_symmetric(cts: Iterable[ConnectionTopology]) -> list[ConnectionTopology]:
    flags = set()
    for c in cts:
        flags |= _orbit(c.flags)
    return [topology_of(f) for f in sorted(flags, key=ConnectivityFlags.sort_key)]


def is_symmetric(spec: IndexedSpec) -> bool:
    """Whether every two-variable part is invariant under swapping its variables.

    Parts with one variable are trivially symmetric; a part with variables
    ``i, j`` must, after the swap, reappear among the parts (compared
    structurally).
    """
    from .ltl import substitute_vars

    bodies = {(p.variables, p.body) for p in spec.parts}
    for part in spec.parts:
        if len(part.variables) < 2:
            continue
        if len(part.variables) > 2:
            return False
        i, j = part.variables
        swapped = substitute_vars(part.body, {i: j, j: i})
        if swapped != part.body and (part.variables, swapped) not in bodies:
            if not _equal_up_to_commutation(swapped, part.body):
                return False
    return True


def _equal_up_to_commutation(a, b) -> bool:
    from .automaton import nnf

    return nnf(a) == nnf(b)


# --------------------------------------------------------------------------
# Quantifier rewriting


@dataclass(frozen=True)
class Obligation:
    """Check the body on topology ``topology`` with variables bound to site positions."""

    topology: int
    binding: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class ReductionSpec:
    topologies: tuple[ConnectionTopology, ...]
    obligations: tuple[Obligation, ...]
    expr: tuple  # ('var', i) | ('and', children) | ('or', children)

    def evaluate(self, value: Callable[[Obligation], bool]) -> bool:
        def ev(e) -> bool:
            if e[0] == "var":
                return value(self.obligations[e[1]])
            if e[0] == "and":
                return all(ev(c) for c in e[1])
            return any(ev(c) for c in e[1])

        return ev(self.expr)

    @property
    def is_conjunction(self) -> bool:
        return self.expr[0] == "var" or (self.expr[0] == "and" and all(c[0] == "var" for c in self.expr[1]))

    def expr_string(self) -> str:
        def s(e) -> str:
            if e[0] == "var":
                return f"g{e[1] + 1}"
            op = " & " if e[0] == "and" else " | "
            if not e[1]:
                return "true" if e[0] == "and" else "false"
            return "(" + op.join(s(c) for c in e[1]) + ")"

        return s(self.expr)


def _simplify(op: str, kids: list) -> tuple:
    flat = []
    for c in kids:
        if c[0] == op:
            flat.extend(c[1])
        else:
            flat.append(c)
    uniq = sorted(set(flat))
    if len(uniq) == 1:
        return uniq[0]
    return (op, tuple(uniq))


def rewrite_quantifiers(spec_part, g: NetworkGraph) -> ReductionSpec:
    """Expand a quantifier prefix over ``g`` into per-topology obligations.

    Universal quantifiers become conjunctions and existential ones
    disjunctions over the admissible nodes; each leaf is the topology of the
    chosen nodes.  Identical leaves share one variable of the Boolean
    combination.
    """
    prefix = spec_part.prefix
    flags_index: dict[ConnectivityFlags, int] = {}
    obligations: dict[Obligation, int] = {}

    def leaf(binding: dict[str, int]):
        distinct_nodes = list(dict.fromkeys(binding[q.var] for q in prefix))
        flags = compute_flags(g, distinct_nodes)
        t = flags_index.setdefault(flags, len(flags_index))
        ob = Obligation(t, tuple((q.var, distinct_nodes.index(binding[q.var]) + 1) for q in prefix))
        return ("var", obligations.setdefault(ob, len(obligations)))

    def go(depth: int, binding: dict[str, int]):
        if depth == len(prefix):
            return leaf(binding)
        q = prefix[depth]
        kids = []
        for n in g.nodes:
            if any(binding.get(o) == n for o in q.distinct):
                continue
            kids.append(go(depth + 1, {**binding, q.var: n}))
        op = "and" if q.kind == "forall" else "or"
        return _simplify(op, kids)

    expr = go(0, {})
    flags_sorted = sorted(flags_index, key=lambda f: flags_index[f])
    obs_sorted = sorted(obligations, key=lambda o: obligations[o])
    return ReductionSpec(tuple(topology_of(f) for f in flags_sorted), tuple(obs_sorted), expr)
