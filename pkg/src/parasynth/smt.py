"""A small SMT-LIB2 term language: construction, rendering, evaluation.

Terms are nested tuples ``(op, *args)``.  Leaves are Python ``bool``,
``int`` and :class:`fractions.Fraction` constants; function applications are
``("app", name, *args)``.  Keeping terms as data lets the same assertions be
printed for the solver and re-evaluated against a parsed model.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

Term = object

BOOL, INT, REAL = "Bool", "Int", "Real"


def app(name: str, *args) -> tuple:
    return ("app", name, *args)


def And(*xs) -> Term:
    out = []
    for x in xs:
        if x is False:
            return False
        if x is True:
            continue
        if isinstance(x, tuple) and x[0] == "and":
            out.extend(x[1:])
        else:
            out.append(x)
    if not out:
        return True
    if len(out) == 1:
        return out[0]
    return ("and", *out)


def Or(*xs) -> Term:
    out = []
    for x in xs:
        if x is True:
            return True
        if x is False:
            continue
        if isinstance(x, tuple) and x[0] == "or":
            out.extend(x[1:])
        else:
            out.append(x)
    if not out:
        return False
    if len(out) == 1:
        return out[0]
    return ("or", *out)


def Not(x) -> Term:
    if isinstance(x, bool):
        return not x
    if isinstance(x, tuple) and x[0] == "not":
        return x[1]
    return ("not", x)


def Implies(a, b) -> Term:
    if a is False or b is True:
        return True
    if a is True:
        return b
    if b is False:
        return Not(a)
    return ("=>", a, b)


def Eq(a, b) -> Term:
    if a is b or (not isinstance(a, tuple) and not isinstance(b, tuple) and a == b and type(a) is type(b)):
        return True
    if isinstance(a, bool) and isinstance(b, bool):
        return a == b
    if isinstance(a, bool):
        return b if a else Not(b)
    if isinstance(b, bool):
        return a if b else Not(a)
    return ("=", a, b)


def Gt(a, b) -> Term:
    return (">", a, b)


def Ge(a, b) -> Term:
    return (">=", a, b)


def Lt(a, b) -> Term:
    return ("<", a, b)


def Le(a, b) -> Term:
    return ("<=", a, b)


def Add(*xs) -> Term:
    xs = [x for x in xs if not (isinstance(x, int) and not isinstance(x, bool) and x == 0)]
    if not xs:
        return 0
    if len(xs) == 1:
        return xs[0]
    return ("+", *xs)


def Mul(c: int, x) -> Term:
    if c == 0:
        return 0
    if c == 1:
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return c * x
    return ("*", c, x)


def Ite(c, a, b) -> Term:
    if c is True:
        return a
    if c is False:
        return b
    return ("ite", c, a, b)


# --------------------------------------------------------------------------
# Rendering


def _const(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v) if v >= 0 else f"(- {-v})"
    if isinstance(v, Fraction):
        num, den = v.numerator, v.denominator
        body = f"{abs(num)}.0" if den == 1 else f"(/ {abs(num)}.0 {den}.0)"
        return body if num >= 0 else f"(- {body})"
    raise TypeError(f"not an SMT constant: {v!r}")


def render(t: Term) -> str:
    if not isinstance(t, tuple):
        return _const(t)
    if t[0] == "app":
        if len(t) == 2:
            return t[1]
        return f"({t[1]} {' '.join(render(a) for a in t[2:])})"
    return f"({t[0]} {' '.join(render(a) for a in t[1:])})"


def symbols(t: Term) -> Iterator[str]:
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, tuple):
            if x[0] == "app":
                yield x[1]
                stack.extend(x[2:])
            else:
                stack.extend(x[1:])


# --------------------------------------------------------------------------
# Scripts


@dataclass(frozen=True)
class FunDecl:
    name: str
    args: tuple[str, ...]
    ret: str

    def render(self) -> str:
        return f"(declare-fun {self.name} ({' '.join(self.args)}) {self.ret})"


@dataclass
class SmtScript:
    logic: str = "UFLIRA"
    decls: dict[str, FunDecl] = field(default_factory=dict)
    assertions: list[tuple[str, Term]] = field(default_factory=list)  # (family, term)
    queries: list[Term] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)
    # Int-valued functions whose results lie in 0..bound-1
    ranges: dict[str, int] = field(default_factory=dict)
    _seen: set = field(default_factory=set, repr=False, compare=False)

    def declare(self, name: str, args: Iterable[str], ret: str, bound: int | None = None) -> str:
        d = FunDecl(name, tuple(args), ret)
        if name in self.decls and self.decls[name] != d:
            raise ValueError(f"conflicting declarations for {name}")
        self.decls[name] = d
        if bound is not None:
            self.ranges[name] = bound
        return name

    def add(self, family: str, term: Term) -> None:
        if term is True or term in self._seen:
            return
        self._seen.add(term)
        self.assertions.append((family, term))

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for fam, _ in self.assertions:
            out[fam] = out.get(fam, 0) + 1
        return out

    def render(self, with_queries: bool = True) -> str:
        decls, assertions = self.grounded()
        lines = [f"; {c}" for c in self.comments]
        lines.append(f"(set-logic {self.logic})")
        lines.extend(d.render() for d in decls)
        fam = None
        for family, term in assertions:
            if family != fam:
                lines.append(f"; {family}")
                fam = family
            lines.append(f"(assert {render(term)})")
        lines.append("(check-sat)")
        if with_queries and self.queries:
            for chunk in _chunks(self.queries, 200):
                lines.append(f"(get-value ({' '.join(render(q) for q in chunk)}))")
        return "\n".join(lines) + "\n"

    def grounded(self) -> tuple[list[FunDecl], list[tuple[str, Term]]]:
        """Declarations and assertions with every application made ground.

        An application with a non-constant argument is replaced by a fresh
        constant, defined by one implication per point of the argument's
        finite domain.  Solvers then never reason about congruence through
        unknown arguments, which is by far the slowest part of these
        problems.  The assertions kept in :attr:`assertions` are unchanged
        and remain the reference for model re-evaluation.
        """
        return _Grounder(self).run()

    def lint(self) -> list[str]:
        """Problems with declared versus used symbols (empty list if clean)."""
        used: set[str] = set()
        for _, term in self.assertions:
            used.update(symbols(term))
        for q in self.queries:
            used.update(symbols(q))
        problems = [f"undeclared symbol {s}" for s in sorted(used - set(self.decls))]
        problems += [f"unused symbol {s}" for s in sorted(set(self.decls) - used)]
        return problems


def _is_const(t) -> bool:
    return not isinstance(t, tuple)


class _Grounder:
    def __init__(self, script: SmtScript):
        self.script = script
        self.decls = list(script.decls.values())
        self.ret = {d.name: d.ret for d in self.decls}
        self.ranges = dict(script.ranges)
        self.memo: dict[tuple, tuple] = {}
        self.defs: list[Term] = []

    def run(self):
        out = [(fam, self.ground(t)) for fam, t in self.script.assertions]
        if self.defs:
            out += [("finite-domain expansion", d) for d in self.defs]
        return self.decls, out

    def sort(self, t) -> str:
        if isinstance(t, bool):
            return BOOL
        if isinstance(t, int):
            return INT
        if isinstance(t, Fraction):
            return REAL
        if t[0] == "app":
            return self.ret[t[1]]
        if t[0] == "ite":
            return self.sort(t[2])
        if t[0] in ("+", "*"):
            return self.sort(t[-1])
        return BOOL

    def domain(self, t) -> list:
        if self.sort(t) == BOOL:
            return [False, True]
        if isinstance(t, int):
            return [t]
        if t[0] == "app" and t[1] in self.ranges:
            return list(range(self.ranges[t[1]]))
        if t[0] == "ite":
            return sorted(set(self.domain(t[2])) | set(self.domain(t[3])))
        raise ValueError(f"no finite domain known for {render(t)}")

    def ground(self, t):
        if _is_const(t):
            return t
        if t[0] != "app":
            return (t[0], *[self.ground(a) for a in t[1:]])
        name, args = t[1], [self.ground(a) for a in t[2:]]
        key = app(name, *args)
        if all(_is_const(a) for a in args):
            return key
        if key in self.memo:
            return self.memo[key]
        aux = f"{name}!{len(self.memo)}"
        self.decls.append(FunDecl(aux, (), self.ret[name]))
        self.ret[aux] = self.ret[name]
        if name in self.ranges:
            self.ranges[aux] = self.ranges[name]
        ref = app(aux)
        self.memo[key] = ref
        free = [k for k, a in enumerate(args) if not _is_const(a)]
        for vals in itertools.product(*[self.domain(args[k]) for k in free]):
            point = list(args)
            for k, v in zip(free, vals):
                point[k] = v
            cond = And(*[Eq(args[k], v) for k, v in zip(free, vals)])
            self.defs.append(Implies(cond, Eq(ref, app(name, *point))))
        return ref


def _chunks(xs: list, size: int) -> Iterator[list]:
    for i in range(0, len(xs), size):
        yield xs[i : i + size]


# --------------------------------------------------------------------------
# Models and evaluation


class ModelError(ValueError):
    pass


@dataclass
class SmtModel:
    """Finite function tables: ``tables[name][args] = value``."""

    tables: dict[str, dict[tuple, object]] = field(default_factory=dict)

    def value(self, name: str, args: tuple):
        try:
            return self.tables[name][args]
        except KeyError:
            raise ModelError(f"model has no value for {name}{args}") from None

    def set(self, name: str, args: tuple, value) -> None:
        self.tables.setdefault(name, {})[args] = value


def evaluate(t: Term, model: SmtModel):
    if not isinstance(t, tuple):
        return t
    op = t[0]
    if op == "app":
        args = tuple(evaluate(a, model) for a in t[2:])
        return model.value(t[1], args)
    if op == "and":
        return all(evaluate(a, model) for a in t[1:])
    if op == "or":
        return any(evaluate(a, model) for a in t[1:])
    if op == "not":
        return not evaluate(t[1], model)
    if op == "=>":
        return (not evaluate(t[1], model)) or bool(evaluate(t[2], model))
    if op == "ite":
        return evaluate(t[2], model) if evaluate(t[1], model) else evaluate(t[3], model)
    vals = [evaluate(a, model) for a in t[1:]]
    if op == "=":
        return vals[0] == vals[1]
    if op == ">":
        return vals[0] > vals[1]
    if op == ">=":
        return vals[0] >= vals[1]
    if op == "<":
        return vals[0] < vals[1]
    if op == "<=":
        return vals[0] <= vals[1]
    if op == "+":
        return sum(vals)
    if op == "*":
        return vals[0] * vals[1]
    raise ModelError(f"cannot evaluate operator {op}")


def failing_assertions(script: SmtScript, model: SmtModel) -> list[tuple[str, Term]]:
    return [(fam, t) for fam, t in script.assertions if not evaluate(t, model)]


# --------------------------------------------------------------------------
# Parsing solver output

_SEXP_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\"(?:[^\"]|\"\")*\")|([^\s()\"]+))")


def parse_sexps(text: str) -> list:
    """Parse whitespace-separated s-expressions into nested lists of atoms."""
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ModelError(f"malformed solver output near {text[pos:pos + 40]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise ModelError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(m.group(3) or m.group(4))
    if len(stack) != 1:
        raise ModelError("unbalanced '(' in solver output")
    return stack[0]


def sexp_value(v):
    """Python value of a solver constant: bools, integers, reals."""
    if isinstance(v, str):
        if v == "true":
            return True
        if v == "false":
            return False
        try:
            f = Fraction(v)
        except ValueError:
            raise ModelError(f"unexpected model value {v!r}") from None
        return int(f) if f.denominator == 1 and "." not in v else f
    if len(v) == 2 and v[0] == "-":
        return -sexp_value(v[1])
    if len(v) == 3 and v[0] == "/":
        return Fraction(sexp_value(v[1])) / Fraction(sexp_value(v[2]))
    raise ModelError(f"unexpected model value {v!r}")
