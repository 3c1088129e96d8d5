"""LTL\\X formulas over indexed atomic propositions.

Formulas are immutable trees.  Atoms carry an optional index term so the
same node type serves both quantified specifications (``g_i``,
``send_{i+1}``) and ground instances (``g_3``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Union


class SpecError(ValueError):
    """Base class for specification errors."""


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NextOperatorError(SpecSyntaxError):
    """Raised when a source uses the next-step operator."""


class UnboundIndexError(SpecError):
    pass


@dataclass(frozen=True, order=True)
class IndexTerm:
    """``base + offset``; base is an index variable name or a constant."""

    base: Union[str, int]
    offset: int = 0

    @property
    def is_ground(self) -> bool:
        return isinstance(self.base, int)

    def __str__(self) -> str:
        if isinstance(self.base, int):
            return str(self.base + self.offset)
        if self.offset == 0:
            return self.base
        sign = "+" if self.offset > 0 else "-"
        return f"{{{self.base}{sign}{abs(self.offset)}}}"


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    index: IndexTerm | None = None

    @property
    def key(self) -> str:
        """Signal name used in valuations, e.g. ``g_3``."""
        if self.index is None:
            return self.name
        return f"{self.name}_{self.index}"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Globally(Formula):
    arg: Formula


@dataclass(frozen=True)
class Finally(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class WeakUntil(Formula):
    left: Formula
    right: Formula


TRUE = Const(True)
FALSE = Const(False)

UNARY = (Not, Globally, Finally)
BINARY = (And, Or, Implies, Iff, Until, WeakUntil)


def atom(key: str) -> Atom:
    """Build an atom from a ground key such as ``g_2`` or ``p``."""
    name, sep, idx = key.rpartition("_")
    if sep and idx.isdigit():
        return Atom(name, IndexTerm(int(idx)))
    return Atom(key)


def conj(parts: Iterable[Formula]) -> Formula:
    """Left-nested conjunction; ``true`` for no parts."""
    result: Formula | None = None
    for p in parts:
        result = p if result is None else And(result, p)
    return TRUE if result is None else result


def disj(parts: Iterable[Formula]) -> Formula:
    result: Formula | None = None
    for p in parts:
        result = p if result is None else Or(result, p)
    return FALSE if result is None else result


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten top-level conjunctions, dropping ``true``."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    if f == TRUE:
        return []
    return [f]


def disjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, Or):
        return disjuncts(f.left) + disjuncts(f.right)
    if f == FALSE:
        return []
    return [f]


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, UNARY):
        return (f.arg,)
    if isinstance(f, BINARY):
        return (f.left, f.right)
    return ()


def rebuild(f: Formula, kids: tuple[Formula, ...]) -> Formula:
    if isinstance(f, UNARY):
        return type(f)(kids[0])
    if isinstance(f, BINARY):
        return type(f)(kids[0], kids[1])
    return f


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def atoms(f: Formula) -> set[Atom]:
    return {n for n in walk(f) if isinstance(n, Atom)}


def atom_keys(f: Formula) -> set[str]:
    return {a.key for a in atoms(f)}


def depth(f: Formula) -> int:
    kids = children(f)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def map_atoms(f: Formula, fn: Callable[[Atom], Formula]) -> Formula:
    if isinstance(f, Atom):
        return fn(f)
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(map_atoms(k, fn) for k in kids))


def substitute(f: Formula, binding: dict[str, int], modulus: int | None = None) -> Formula:
    """Replace index variables by constants.

    With ``modulus`` set, ``base + offset`` is reduced into ``1..modulus``.
    """

    def sub(a: Atom) -> Formula:
        if a.index is None or a.index.is_ground:
            return a
        if a.index.base not in binding:
            raise UnboundIndexError(f"index variable {a.index.base!r} is not bound")
        value = binding[a.index.base] + a.index.offset
        if modulus is not None:
            value = (value - 1) % modulus + 1
        return Atom(a.name, IndexTerm(value))

    return map_atoms(f, sub)


def substitute_vars(f: Formula, renaming: dict[str, str]) -> Formula:
    """Rename index variables simultaneously."""

    def sub(a: Atom) -> Formula:
        if a.index is None or a.index.is_ground or a.index.base not in renaming:
            return a
        return Atom(a.name, IndexTerm(renaming[a.index.base], a.index.offset))

    return map_atoms(f, sub)


def is_liveness(f: Formula) -> bool:
    """True iff the formula contains an eventuality (F or U)."""
    return any(isinstance(n, (Finally, Until)) for n in walk(f))


# --------------------------------------------------------------------------
# Printing

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4, Until: 5, WeakUntil: 5}
_SYM = {Iff: "<->", Implies: "->", Or: "|", And: "&", Until: "U", WeakUntil: "W"}
_RIGHT_ASSOC = (Implies, Until, WeakUntil)
_UNARY_SYM = {Not: "!", Globally: "G", Finally: "F"}
_ATOMIC_PREC = 6


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), _ATOMIC_PREC)


def to_string(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.key
    if isinstance(f, UNARY):
        inner = to_string(f.arg)
        if _prec(f.arg) < _ATOMIC_PREC:
            inner = f"({inner})"
        sym = _UNARY_SYM[type(f)]
        return f"{sym}{inner}" if sym == "!" else f"{sym} {inner}"
    p = _prec(f)
    left, right = to_string(f.left), to_string(f.right)
    lp, rp = _prec(f.left), _prec(f.right)
    if isinstance(f, _RIGHT_ASSOC):
        if lp <= p:
            left = f"({left})"
        if rp < p:
            right = f"({right})"
    elif isinstance(f, Iff):
        if lp < p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
    else:
        if lp < p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
    return f"{left} {_SYM[type(f)]} {right}"


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><->|->|!=|[!&|().,;])
  | (?P<ident>[A-Za-z][A-Za-z0-9]*(?:_(?:\{[^}]*\}|[A-Za-z0-9]+))?)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)

_INDEX_EXPR = re.compile(r"^\s*(?:([A-Za-z][A-Za-z0-9]*)\s*(?:([+-])\s*(\d+))?|(\d+))\s*$")
_TEMPORAL_LETTERS = set("GFX")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        assert m is not None
        kind = m.lastgroup
        chunk = m.group()
        if kind == "bad":
            raise SpecSyntaxError(f"unexpected character {chunk!r}", line, column)
        if kind == "ident" and "_" not in chunk and set(chunk) <= _TEMPORAL_LETTERS and len(chunk) > 1:
            # "GF p" is read as "G F p"
            for i, ch in enumerate(chunk):
                tokens.append(Token("ident", ch, line, column + i))
        elif kind != "ws":
            tokens.append(Token(kind, chunk, line, column))
        for ch in chunk:
            if ch == "\n":
                line += 1
                column = 1
            else:
                column += 1
        pos = m.end()
    tokens.append(Token("eof", "", line, column))
    return tokens


def parse_index(text: str, tok: Token) -> IndexTerm:
    m = _INDEX_EXPR.match(text)
    if not m:
        raise SpecSyntaxError(f"malformed index {text!r}", tok.line, tok.column)
    if m.group(4) is not None:
        return IndexTerm(int(m.group(4)))
    base = m.group(1)
    offset = int(m.group(3)) if m.group(3) else 0
    if m.group(2) == "-":
        offset = -offset
    if base.isdigit():
        return IndexTerm(int(base) + offset)
    return IndexTerm(base, offset)


class Parser:
    """Recursive-descent parser over a token list.

    Precedence from loosest: ``<->``, ``->`` (right), ``|``, ``&``,
    ``U``/``W`` (right), then the prefix operators ``! G F``.
    """

    KEYWORDS = {"G", "F", "X", "U", "W", "true", "false", "forall", "exists"}

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, msg: str) -> None:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise SpecSyntaxError(f"{msg}, found {found}", t.line, t.column)

    def formula(self) -> Formula:
        return self.iff()

    def iff(self) -> Formula:
        left = self.implies()
        while self.at("<->"):
            self.advance()
            left = Iff(left, self.implies())
        return left

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.at("->"):
            self.advance()
            return Implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.at("|"):
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.until()
        while self.at("&"):
            self.advance()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.at("U"):
            self.advance()
            return Until(left, self.until())
        if self.at("W"):
            self.advance()
            return WeakUntil(left, self.until())
        return left

    def unary(self) -> Formula:
        t = self.tok
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        if self.at("G"):
            self.advance()
            return Globally(self.unary())
        if self.at("F"):
            self.advance()
            return Finally(self.unary())
        if self.at("X"):
            raise NextOperatorError("LTL\\X violation: the next-step operator X is not allowed", t.line, t.column)
        return self.primary()

    def primary(self) -> Formula:
        t = self.tok
        if self.at("("):
            self.advance()
            f = self.formula()
            self.expect(")")
            return f
        if self.at("true"):
            self.advance()
            return TRUE
        if self.at("false"):
            self.advance()
            return FALSE
        if t.kind == "ident" and t.text not in self.KEYWORDS:
            self.advance()
            name, sep, idx = t.text.partition("_")
            if not sep:
                return Atom(name)
            if idx.startswith("{"):
                idx = idx[1:-1]
            return Atom(name, parse_index(idx, t))
        self.error("expected a formula")
        raise AssertionError  # unreachable


def parse_formula(text: str, line: int = 1, column: int = 1) -> Formula:
    p = Parser(tokenize(text, line, column))
    f = p.formula()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return f
