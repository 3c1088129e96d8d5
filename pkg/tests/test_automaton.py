import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasynth.automaton import (
    ExclusiveGroup,
    LassoMatrices,
    all_words,
    eval_ltl_batch,
    eval_ltl_on_lasso,
    lasso_accepts,
    ltl_to_nba,
    ltl_to_ucw,
    nnf,
    to_dot,
)
from parasynth.ltl import (
    TRUE,
    And,
    Atom,
    Finally,
    Globally,
    Iff,
    Implies,
    Not,
    Or,
    Until,
    WeakUntil,
    depth,
    parse_formula,
)

ATOMS = ["p", "q", "r"]
UNARY = [Not, Globally, Finally]
BINARY = [And, Or, Implies, Iff, Until, WeakUntil]


def random_formula(rng: random.Random, d: int):
    if d == 0 or rng.random() < 0.2:
        return rng.choice([Atom(a) for a in ATOMS] + [TRUE])
    op = rng.choice(UNARY + BINARY)
    if op in UNARY:
        return op(random_formula(rng, d - 1))
    return op(random_formula(rng, d - 1), random_formula(rng, d - 1))


letters = st.frozensets(st.sampled_from(ATOMS))
lassos = st.tuples(st.lists(letters, max_size=3), st.lists(letters, min_size=1, max_size=3))


class TestConstruction:
    def test_response_property(self):
        u = ltl_to_ucw(parse_formula("G (r -> F g)"))
        assert u.states == (0, 1)
        assert u.initial == 0
        assert u.rejecting == frozenset({1})
        assert set(u.edges) == {
            (0, frozenset(), 0),
            (0, frozenset({("r", True), ("g", False)}), 1),
            (1, frozenset({("g", False)}), 1),
        }

    def test_safety_violation_goes_to_sink(self):
        u = ltl_to_ucw(parse_formula("G !(a & b)"))
        assert u.sink is not None
        into_sink = [lab for q, lab, r in u.edges if r == u.sink and q != u.sink]
        assert into_sink == [frozenset({("a", True), ("b", True)})]

    def test_true_has_no_rejecting_run(self):
        u = ltl_to_ucw(TRUE)
        assert not u.rejecting

    def test_nnf_pushes_negation(self):
        assert nnf(parse_formula("!G a")) == nnf(parse_formula("F !a"))

    def test_deterministic(self):
        f = parse_formula("G (r1 -> F g1) & G (r2 -> F g2) & G !(g1 & g2)")
        assert ltl_to_ucw(f) == ltl_to_ucw(f)

    def test_dot_export(self):
        text = to_dot(ltl_to_ucw(parse_formula("G (r -> F g)")))
        assert text.startswith("digraph") and "doublecircle" in text

    def test_exclusive_group_prunes_inconsistent_labels(self):
        f = parse_formula("G F s0 & G F s1 -> G (r -> F g)")
        group = ExclusiveGroup(frozenset({"s0", "s1"}), exactly=True)
        for _, label, _ in ltl_to_ucw(f, [group]).edges:
            assert sum(1 for a, pos in label if a in group.atoms and pos) <= 1


class TestSemantics:
    @given(st.integers(0, 10**6), lassos)
    @settings(max_examples=300, deadline=None)
    def test_nba_matches_semantics(self, seed, lasso):
        f = random_formula(random.Random(seed), 3)
        stem, loop = lasso
        assert lasso_accepts(ltl_to_nba(f), stem, loop) == eval_ltl_on_lasso(f, stem, loop)

    @given(st.integers(0, 10**6), lassos)
    @settings(max_examples=300, deadline=None)
    def test_ucw_matches_semantics(self, seed, lasso):
        f = random_formula(random.Random(seed), 3)
        stem, loop = lasso
        assert lasso_accepts(ltl_to_ucw(f), stem, loop) == eval_ltl_on_lasso(f, stem, loop)

    @given(st.integers(0, 10**6), lassos)
    @settings(max_examples=200, deadline=None)
    def test_exclusivity_preserves_acceptance_on_consistent_words(self, seed, lasso):
        f = random_formula(random.Random(seed), 3)
        group = ExclusiveGroup(frozenset({"p", "q"}))
        stem, loop = lasso
        stem = [x - {"q"} if "p" in x else x for x in stem]
        loop = [x - {"q"} if "p" in x else x for x in loop]
        assert lasso_accepts(ltl_to_ucw(f, [group]), stem, loop) == eval_ltl_on_lasso(f, stem, loop)

    @pytest.mark.parametrize("seed", range(5))
    def test_batch_matrices_match_scalar(self, seed):
        rng = random.Random(seed)
        f = random_formula(rng, 3)
        u = ltl_to_ucw(f)
        stems, loops = all_words(2, 8), all_words(2, 8)
        got = LassoMatrices(u, ATOMS).accepts(stems, loops)
        for _ in range(50):
            i, j = rng.randrange(len(stems)), rng.randrange(len(loops))
            stem = [frozenset(a for b, a in enumerate(ATOMS) if w >> b & 1) for w in stems[i]]
            loop = [frozenset(a for b, a in enumerate(ATOMS) if w >> b & 1) for w in loops[j]]
            assert got[i, j] == lasso_accepts(u, stem, loop)

    def test_batch_semantics_match_scalar(self):
        f = parse_formula("G (p -> F q) & (r U q)")
        stems, loops = all_words(1, 8), all_words(2, 8)
        got = eval_ltl_batch(f, ATOMS, stems, loops)
        for i in range(len(stems)):
            for j in range(len(loops)):
                stem = [frozenset(a for b, a in enumerate(ATOMS) if w >> b & 1) for w in stems[i]]
                loop = [frozenset(a for b, a in enumerate(ATOMS) if w >> b & 1) for w in loops[j]]
                assert got[i, j] == eval_ltl_on_lasso(f, stem, loop)

    def test_random_formulas_have_bounded_depth(self):
        rng = random.Random(0)
        assert all(depth(random_formula(rng, 3)) <= 3 for _ in range(100))

    def test_empty_loop_rejected(self):
        with pytest.raises(ValueError):
            eval_ltl_on_lasso(parse_formula("p"), [], [])

    def test_all_words(self):
        w = all_words(2, 3)
        assert w.shape == (9, 2)
        assert len({tuple(x) for x in w}) == 9
