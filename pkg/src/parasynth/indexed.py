"""Indexed specifications: parsing, cutoff classification, instantiation.

A specification file is line oriented::

    input r;
    output g;
    guarantee forall i != j . G !(g_i & g_j);
    guarantee forall i . G (r_i -> F g_i);

``tok`` and ``send`` are implicit outputs of every process; ``sched`` is the
scheduler's per-process signal.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ltl import (
    TRUE,
    Atom,
    Finally,
    Formula,
    Globally,
    Implies,
    IndexTerm,
    Not,
    Parser,
    SpecError,
    SpecSyntaxError,
    Token,
    UnboundIndexError,
    atoms,
    conj,
    conjuncts,
    is_liveness,
    substitute,
    to_string,
    tokenize,
)

TOKEN_SIGNALS = ("tok", "send")
SCHED = "sched"
RESERVED = {*TOKEN_SIGNALS, SCHED}


class NoCutoffError(SpecError):
    """The specification does not match any shape with a known cutoff."""


@dataclass(frozen=True)
class Quantifier:
    kind: str  # "forall" | "exists"
    var: str
    distinct: frozenset[str] = frozenset()


@dataclass(frozen=True)
class QuantifiedFormula:
    prefix: tuple[Quantifier, ...]
    body: Formula

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(q.var for q in self.prefix)

    @property
    def universal(self) -> bool:
        return all(q.kind == "forall" for q in self.prefix)

    def assignments(self, domain: Sequence[int]) -> Iterable[dict[str, int]]:
        """All bindings of the prefix into ``domain`` respecting distinctness."""
        names = self.variables
        for values in itertools.product(domain, repeat=len(names)):
            binding = dict(zip(names, values))
            if all(binding[q.var] != binding[o] for q in self.prefix for o in q.distinct):
                yield binding

    def __str__(self) -> str:
        return f"{prefix_string(self.prefix)}{to_string(self.body)}"


@dataclass(frozen=True)
class IndexedSpec:
    """Conjunction of quantified guarantees."""

    parts: tuple[QuantifiedFormula, ...]

    @property
    def universal(self) -> bool:
        return all(p.universal for p in self.parts)

    def __str__(self) -> str:
        return "\n".join(f"{p};" for p in self.parts)


@dataclass(frozen=True)
class ProcessInterface:
    env_inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = TOKEN_SIGNALS

    def __post_init__(self):
        clash = set(self.env_inputs) & set(self.outputs)
        if clash:
            raise SpecError(f"signals declared as both input and output: {sorted(clash)}")
        if set(self.env_inputs) & RESERVED:
            raise SpecError(f"reserved signal declared as input: {sorted(set(self.env_inputs) & RESERVED)}")
        missing = [s for s in TOKEN_SIGNALS if s not in self.outputs]
        if missing:
            object.__setattr__(self, "outputs", tuple(self.outputs) + tuple(missing))

    @property
    def user_outputs(self) -> tuple[str, ...]:
        return tuple(o for o in self.outputs if o not in TOKEN_SIGNALS)

    @property
    def env_outputs(self) -> tuple[str, ...]:
        """Signals driven by the environment: requests plus scheduling."""
        return tuple(self.env_inputs) + (SCHED,)

    def signal_kind(self, name: str) -> str:
        if name in self.outputs:
            return "output"
        if name in self.env_inputs:
            return "input"
        if name == SCHED:
            return "sched"
        raise SpecError(f"undeclared signal {name!r}")

    def check(self, spec: IndexedSpec) -> None:
        for part in spec.parts:
            for a in atoms(part.body):
                self.signal_kind(a.name)


# --------------------------------------------------------------------------
# Parsing

_COMMENT = re.compile(r"(#|//)[^\n]*")


def prefix_string(prefix: Sequence[Quantifier]) -> str:
    out = []
    i = 0
    while i < len(prefix):
        kind = prefix[i].kind
        block = [prefix[i]]
        i += 1
        while i < len(prefix) and prefix[i].kind == kind:
            block.append(prefix[i])
            i += 1
        inside = {q.var for q in block}
        text = ""
        for pos, q in enumerate(block):
            if pos:
                text += " != " if block[pos - 1].var in q.distinct else ", "
            text += q.var + "".join(f" != {d}" for d in sorted(q.distinct - inside))
        out.append(f"{kind} {text} . ")
    return "".join(out)


class SpecParser(Parser):
    def prefix(self) -> tuple[Quantifier, ...]:
        quants: list[Quantifier] = []
        declared: set[str] = set()
        while self.at("forall") or self.at("exists"):
            kind = self.advance().text
            while True:
                chain = [self.variable()]
                while self.at("!="):
                    self.advance()
                    chain.append(self.variable())
                for pos, name in enumerate(chain):
                    if name in declared:
                        continue
                    others = frozenset(chain[:pos]) | frozenset(
                        n for n in chain[pos + 1 :] if n in declared
                    )
                    quants.append(Quantifier(kind, name, others))
                    declared.add(name)
                if not self.at(","):
                    break
                self.advance()
            self.expect(".")
        return tuple(quants)

    def variable(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in self.KEYWORDS or "_" in t.text:
            self.error("expected an index variable")
        self.advance()
        return t.text

    def quantified(self) -> QuantifiedFormula:
        start = self.tok
        prefix = self.prefix()
        body = self.formula()
        bound = {q.var for q in prefix}
        for a in atoms(body):
            if a.index is not None and not a.index.is_ground and a.index.base not in bound:
                raise UnboundIndexError(
                    f"line {start.line}: index variable {a.index.base!r} of {a.key} is not bound"
                )
        return QuantifiedFormula(prefix, body)

    def names(self) -> list[str]:
        out = [self.signal_name()]
        while self.at(","):
            self.advance()
            out.append(self.signal_name())
        return out

    def signal_name(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in self.KEYWORDS or "_" in t.text:
            self.error("expected a signal name")
        self.advance()
        return t.text

    def end_statement(self) -> None:
        if self.at(";"):
            self.advance()
        elif self.tok.kind != "eof":
            self.error("expected ';'")


def parse_quantified(text: str) -> QuantifiedFormula:
    p = SpecParser(tokenize(text))
    q = p.quantified()
    p.end_statement()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return q


def parse_spec(text: str) -> tuple[IndexedSpec, ProcessInterface]:
    """Parse a specification source into guarantees and the signal interface.

    A bare quantified formula (no ``guarantee`` keyword) is accepted too.
    """
    cleaned = _COMMENT.sub(lambda m: " " * len(m.group()), text)
    p = SpecParser(tokenize(cleaned))
    inputs: list[str] = []
    outputs: list[str] = []
    parts: list[QuantifiedFormula] = []
    declared = False
    while p.tok.kind != "eof":
        if p.at(";"):
            p.advance()
            continue
        if p.at("input") or p.at("output"):
            kind = p.advance().text
            (inputs if kind == "input" else outputs).extend(p.names())
            declared = True
            p.end_statement()
            continue
        if p.at("guarantee"):
            p.advance()
        parts.append(p.quantified())
        p.end_statement()
    if not parts:
        t: Token = p.tok
        raise SpecSyntaxError("specification has no guarantees", t.line, t.column)
    spec = IndexedSpec(tuple(parts))
    bad = [s for s in inputs + outputs if s in RESERVED]
    if bad:
        raise SpecError(f"reserved signal names cannot be declared: {bad}")
    iface = ProcessInterface(tuple(inputs), tuple(outputs) + TOKEN_SIGNALS)
    if declared:
        iface.check(spec)
    return spec, iface


# --------------------------------------------------------------------------
# Cutoffs

CUTOFFS = {"A": 2, "B": 3, "C": 4, "D": 5}


@dataclass(frozen=True, order=True)
class CutoffClass:
    cls: str
    cutoff: int = field(compare=False, default=0)

    def __post_init__(self):
        if self.cls not in CUTOFFS:
            raise ValueError(f"unknown cutoff class {self.cls!r}")
        object.__setattr__(self, "cutoff", CUTOFFS[self.cls])

    def __str__(self) -> str:
        return f"class {self.cls}, cutoff {self.cutoff}"


def _offsets(part: QuantifiedFormula) -> dict[str, set[int]]:
    out: dict[str, set[int]] = {}
    for a in atoms(part.body):
        if a.index is None:
            continue
        if a.index.is_ground:
            raise NoCutoffError(f"no known cutoff: constant index in {a.key}")
        out.setdefault(a.index.base, set()).add(a.index.offset)
    return out


def classify_part(part: QuantifiedFormula) -> CutoffClass:
    if not part.universal:
        raise NoCutoffError("no known cutoff: existential quantifier")
    offsets = _offsets(part)
    if len(offsets) > 2:
        raise NoCutoffError("no known cutoff: more than two index variables")
    spans = []
    for var, offs in offsets.items():
        span = max(offs) - min(offs)
        if span > 1:
            raise NoCutoffError(f"no known cutoff: index offsets of {var!r} span more than one")
        spans.append(span)
    if len(spans) < 2:
        return CutoffClass("B" if spans and spans[0] else "A")
    if sum(spans) == 2:
        raise NoCutoffError("no known cutoff: both index variables carry successor terms")
    # forall i, j without i != j adds the diagonal forall i. phi(i, i), which
    # is class A or B and therefore dominated.
    return CutoffClass("D" if sum(spans) == 1 else "C")


def classify(spec: IndexedSpec) -> CutoffClass:
    """Cutoff class of a conjunction: the largest class of its parts."""
    return max(classify_part(p) for p in spec.parts)


def instances(spec: IndexedSpec, n: int) -> list[Formula]:
    """One ground formula per admissible index assignment into ``1..n``."""
    if n < 1:
        raise ValueError("ring size must be at least 1")
    if not spec.universal:
        raise SpecError("instantiate requires a purely universal prefix")
    out = []
    for part in spec.parts:
        for binding in part.assignments(range(1, n + 1)):
            out.append(substitute(part.body, binding, modulus=n))
    return out


def instantiate(spec: IndexedSpec, n: int) -> Formula:
    return conj(instances(spec, n))


def sched(i: int) -> Atom:
    return Atom(SCHED, IndexTerm(i))


def signal(name: str, i: int) -> Atom:
    return Atom(name, IndexTerm(i))


def fair_scheduling(indices: Iterable[int]) -> Formula:
    return conj(Globally(Finally(sched(j))) for j in indices)


def fair_token(indices: Iterable[int]) -> Formula:
    return conj(Globally(Finally(signal("tok", i))) for i in indices)


def token_release(i: int) -> Formula:
    return Globally(Implies(signal("tok", i), Finally(signal("send", i))))


def augment_fairness(
    ground: Formula,
    mode: str,
    n: int,
    *,
    scheduled: Sequence[int] | None = None,
    release: Sequence[int] | None = None,
) -> Formula:
    """Attach fairness premises to liveness conjuncts and add token release.

    ``scheduled`` lists the processes covered by fair scheduling (default
    ``1..n``); ``release`` the processes that must release the token, which
    in network mode are also those covered by fair token passing.
    """
    if mode not in ("ring", "network"):
        raise ValueError(f"unknown mode {mode!r}")
    scheduled = list(range(1, n + 1)) if scheduled is None else list(scheduled)
    release = list(range(1, n + 1)) if release is None else list(release)
    fair_sched = fair_scheduling(scheduled)
    premise = fair_sched if mode == "ring" else fair_token(release)
    out = []
    for c in conjuncts(ground):
        out.append(Implies(premise, c) if is_liveness(c) else c)
    out.extend(Implies(fair_sched, token_release(i)) for i in release)
    return conj(out)


def token_assumption() -> Formula:
    return Globally(Implies(Not(signal("tok", 1)), Finally(signal("send", 2)))) & Globally(
        Implies(signal("tok", 1), Not(signal("send", 2)))
    )


def build_token_assumption(spec: IndexedSpec) -> Formula:
    """``A_token -> phi(1)`` for single-process synthesis of a class-A spec."""
    c = classify(spec)
    if c.cls != "A":
        raise SpecError(f"token assumption needs a class A specification, got {c}")
    body = conj(substitute(p.body, {v: 1 for v in p.variables}) for p in spec.parts)
    return Implies(token_assumption(), body)


# --------------------------------------------------------------------------
# Site obligations for network decomposition


def site_obligation(spec: IndexedSpec, k: int) -> Formula:
    """Quantifier-free obligation over sites ``1..k`` for a universal spec.

    Each part is instantiated over every injective placement of its variables
    onto the sites, so the result is invariant under site permutations.
    """
    if not spec.universal:
        raise SpecError("site obligations need a purely universal prefix")
    out = []
    for part in spec.parts:
        if any(a.index is not None and a.index.offset for a in atoms(part.body)):
            raise SpecError("index arithmetic is not defined in token-passing networks")
        for values in itertools.permutations(range(1, k + 1), len(part.variables)):
            out.append(substitute(part.body, dict(zip(part.variables, values))))
    return conj(out) if out else TRUE
