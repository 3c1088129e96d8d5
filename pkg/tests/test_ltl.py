import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasynth.ltl import (
    FALSE,
    TRUE,
    And,
    Atom,
    Finally,
    Globally,
    Iff,
    Implies,
    IndexTerm,
    NextOperatorError,
    Not,
    Or,
    SpecSyntaxError,
    Until,
    WeakUntil,
    atom,
    atom_keys,
    conj,
    conjuncts,
    depth,
    is_liveness,
    parse_formula,
    substitute,
    substitute_vars,
    to_string,
)

ATOM_NAMES = ["a", "b", "c", "g_1", "r_2"]


def formulas(max_leaves=12):
    leaves = st.one_of(st.sampled_from([atom(n) for n in ATOM_NAMES]), st.sampled_from([TRUE, FALSE]))

    def extend(children):
        unary = st.sampled_from([Not, Globally, Finally])
        binary = st.sampled_from([And, Or, Implies, Iff, Until, WeakUntil])
        return st.one_of(
            st.builds(lambda op, x: op(x), unary, children),
            st.builds(lambda op, x, y: op(x, y), binary, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


class TestParser:
    def test_precedence(self):
        f = parse_formula("a | b & c -> d")
        assert f == Implies(Or(atom("a"), And(atom("b"), atom("c"))), atom("d"))

    def test_implication_is_right_associative(self):
        assert parse_formula("a -> b -> c") == Implies(atom("a"), Implies(atom("b"), atom("c")))

    def test_until_binds_tighter_than_and(self):
        assert parse_formula("a & b U c") == And(atom("a"), Until(atom("b"), atom("c")))

    def test_indexed_atoms(self):
        f = parse_formula("G (tok_i -> F send_{i+1})")
        assert atom_keys(f) == {"tok_i", "send_{i+1}"}
        send = f.arg.right.arg
        assert isinstance(send, Atom) and send.index == IndexTerm("i", 1)

    def test_next_is_rejected(self):
        with pytest.raises(NextOperatorError):
            parse_formula("G (a -> X b)")

    def test_syntax_error_has_position(self):
        with pytest.raises(SpecSyntaxError) as e:
            parse_formula("a &")
        assert "line 1" in str(e.value)

    def test_unbalanced_parenthesis(self):
        with pytest.raises(SpecSyntaxError):
            parse_formula("(a | b")

    @given(formulas())
    @settings(max_examples=200, deadline=None)
    def test_print_parse_round_trip(self, f):
        assert parse_formula(to_string(f)) == f


class TestHelpers:
    def test_conj_and_conjuncts(self):
        parts = [atom("a"), atom("b"), atom("c")]
        assert conjuncts(conj(parts)) == parts
        assert conj([]) == TRUE

    def test_depth(self):
        assert depth(atom("a")) == 0
        assert depth(parse_formula("G (a -> F b)")) == 3

    def test_liveness(self):
        assert is_liveness(parse_formula("G (r -> F g)"))
        assert not is_liveness(parse_formula("G !(a & b)"))

    def test_substitute_with_modulus(self):
        f = parse_formula("g_{i+1} & g_j")
        assert to_string(substitute(f, {"i": 4, "j": 2}, modulus=4)) == "g_1 & g_2"

    def test_substitute_vars_swaps(self):
        f = parse_formula("G !(g_i & g_j)")
        assert to_string(substitute_vars(f, {"i": "j", "j": "i"})) == "G !(g_j & g_i)"
