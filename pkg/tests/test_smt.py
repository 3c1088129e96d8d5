import shutil
import subprocess
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from parasynth.smt import (
    BOOL,
    INT,
    REAL,
    Add,
    And,
    Eq,
    Gt,
    Implies,
    Ite,
    ModelError,
    Mul,
    Not,
    Or,
    SmtModel,
    SmtScript,
    _Grounder,
    app,
    evaluate,
    failing_assertions,
    parse_sexps,
    render,
    sexp_value,
)


class TestTerms:
    def test_constant_folding(self):
        x = app("x")
        assert And(True, x) == x
        assert And(x, False) is False
        assert Or(False, False) is False
        assert Ite(True, 1, 2) == 1

    def test_render(self):
        t = Implies(app("b"), Gt(app("f", 1, app("x")), Fraction(-1, 2)))
        assert render(t) == "(=> b (> (f 1 x) (- (/ 1.0 2.0))))"
        assert render(-3) == "(- 3)"

    def test_evaluate(self):
        m = SmtModel()
        m.set("x", (), 2)
        m.set("f", (2,), 5)
        assert evaluate(Eq(app("f", app("x")), Add(Mul(2, 2), 1)), m)
        assert evaluate(Not(Gt(app("x"), 3)), m)
        with pytest.raises(ModelError):
            evaluate(app("g", 1), m)


class TestScript:
    def script(self):
        s = SmtScript()
        s.declare("x", [], INT, bound=3)
        s.declare("f", [INT], INT, bound=3)
        s.declare("p", [INT], BOOL)
        s.add("a", Eq(app("f", app("x")), 2))
        s.add("b", Implies(app("p", app("f", 0)), Eq(app("x"), 1)))
        s.add("b", Implies(app("p", app("f", 0)), Eq(app("x"), 1)))
        s.queries = [app("x"), app("f", 0)]
        return s

    def test_deduplicates(self):
        assert self.script().family_counts() == {"a": 1, "b": 1}

    def test_conflicting_declaration(self):
        s = self.script()
        with pytest.raises(ValueError):
            s.declare("x", [], REAL)

    def test_lint(self):
        s = self.script()
        assert s.lint() == []
        s.declare("unused", [], INT)
        s.add("c", app("ghost"))
        assert s.lint() == ["undeclared symbol ghost", "unused symbol unused"]

    def test_render_is_ground(self):
        text = self.script().render()
        assert "(f x)" not in text
        assert "(declare-fun f!0 () Int)" in text
        assert text.rstrip().endswith("(get-value (x (f 0)))")

    def test_unbounded_argument_is_rejected(self):
        s = SmtScript()
        s.declare("y", [], INT)
        s.declare("f", [INT], INT)
        s.add("a", Eq(app("f", app("y")), 0))
        with pytest.raises(ValueError, match="finite domain"):
            s.render()

    def test_failing_assertions(self):
        s = self.script()
        m = SmtModel({"x": {(): 1}, "f": {(1,): 2, (0,): 0}, "p": {(0,): True}})
        assert failing_assertions(s, m) == []
        m.set("x", (), 0)
        assert [fam for fam, _ in failing_assertions(s, m)] == ["a", "b"]

    @pytest.mark.skipif(shutil.which("z3") is None, reason="z3 executable not found")
    def test_solver_accepts_rendering(self):
        out = subprocess.run(["z3", "-in"], input=self.script().render(), capture_output=True, text=True)
        assert out.stdout.splitlines()[0] == "sat"


# random scripts over f, g : 0..2 -> 0..2 and a Boolean table p
consts = st.integers(0, 2)


def terms(depth=2):
    leaf = st.one_of(consts, st.just(app("x")))
    if depth == 0:
        return leaf
    sub = terms(depth - 1)
    return st.one_of(
        leaf,
        st.builds(lambda a: app("f", a), sub),
        st.builds(lambda a, b: app("g", a, b), sub, sub),
        st.builds(lambda c, a, b: Ite(app("p", c), a, b), sub, sub, sub),
    )


tables = st.fixed_dictionaries(
    {
        "x": st.fixed_dictionaries({(): consts}),
        "f": st.fixed_dictionaries({(a,): consts for a in range(3)}),
        "g": st.fixed_dictionaries({(a, b): consts for a in range(3) for b in range(3)}),
        "p": st.fixed_dictionaries({(a,): st.booleans() for a in range(3)}),
    }
)


class TestGrounding:
    @given(terms(), terms(), tables)
    @settings(max_examples=200, deadline=None)
    def test_grounding_preserves_truth(self, lhs, rhs, tabs):
        s = SmtScript()
        s.declare("x", [], INT, bound=3)
        s.declare("f", [INT], INT, bound=3)
        s.declare("g", [INT, INT], INT, bound=3)
        s.declare("p", [INT], BOOL)
        s.add("eq", Eq(lhs, rhs))
        assume(s.assertions)
        model = SmtModel({k: dict(v) for k, v in tabs.items()})
        grounder = _Grounder(s)
        _, grounded = grounder.run()
        # the intended interpretation of each fresh constant
        for key, ref in grounder.memo.items():
            model.set(ref[1], (), evaluate(key, model))
        defs = [t for fam, t in grounded if fam == "finite-domain expansion"]
        assert all(evaluate(d, model) for d in defs)
        assert evaluate(grounded[0][1], model) == evaluate(s.assertions[0][1], model)


class TestSexps:
    def test_nested(self):
        assert parse_sexps("sat\n((x 1) ((f 0) (- 2)))") == ["sat", [["x", "1"], [["f", "0"], ["-", "2"]]]]

    def test_quoted_string(self):
        assert parse_sexps('(error "line 3: bad")') == [["error", '"line 3: bad"']]

    @pytest.mark.parametrize("text", ["((x 1)", "(x 1))"])
    def test_unbalanced(self, text):
        with pytest.raises(ModelError):
            parse_sexps(text)

    @pytest.mark.parametrize(
        "raw, value",
        [("true", True), ("false", False), ("7", 7), ("2.0", Fraction(2)), (["-", "3"], -3), (["/", "1.0", "4.0"], Fraction(1, 4))],
    )
    def test_values(self, raw, value):
        assert sexp_value(raw) == value

    def test_unknown_value(self):
        with pytest.raises(ModelError):
            sexp_value("foo")
