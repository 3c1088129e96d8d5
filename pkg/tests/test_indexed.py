import pytest

from parasynth.indexed import (
    CutoffClass,
    NoCutoffError,
    ProcessInterface,
    augment_fairness,
    build_token_assumption,
    classify,
    instances,
    instantiate,
    parse_quantified,
    parse_spec,
    prefix_string,
    site_obligation,
)
from parasynth.ltl import SpecError, SpecSyntaxError, UnboundIndexError, atom_keys, conjuncts, to_string


def spec_of(body: str):
    return parse_spec(f"input r; output g; {body}")[0]


class TestParsing:
    def test_arbiter(self, arbiter):
        spec, iface = arbiter
        assert iface.env_inputs == ("r",)
        assert iface.outputs == ("g", "tok", "send")
        assert [p.variables for p in spec.parts] == [("i", "j"), ("i",)]

    def test_comments_and_bare_statements(self):
        spec, _ = parse_spec("# arbiter\ninput r; // requests\noutput g;\nforall i . G (r_i -> F g_i);\n")
        assert len(spec.parts) == 1

    def test_prefix_round_trip(self):
        for text in ["forall i . G g_i", "forall i != j . G !(g_i & g_j)", "forall i . exists j != i . F g_j"]:
            q = parse_quantified(text)
            assert parse_quantified(f"{prefix_string(q.prefix)} {to_string(q.body)}") == q

    def test_unbound_index_is_rejected(self):
        with pytest.raises(UnboundIndexError):
            parse_spec("input r; output g; forall i . G g_j;")

    def test_missing_semicolon(self):
        with pytest.raises(SpecSyntaxError):
            parse_spec("input r output g;")

    def test_reserved_signal_as_input(self):
        with pytest.raises(SpecError):
            ProcessInterface(env_inputs=("tok",))

    def test_undeclared_signal(self):
        with pytest.raises(SpecError, match="undeclared"):
            parse_spec("input r; output g; forall i . G (r_i -> F h_i);")


class TestCutoffs:
    @pytest.mark.parametrize(
        "body, cls",
        [
            ("forall i . G (r_i -> F g_i);", "A"),
            ("forall i . G (tok_i -> F send_{i+1});", "B"),
            ("forall i != j . G !(g_i & g_j);", "C"),
            ("forall i, j . G (g_i -> F g_j);", "C"),
            ("forall i != j . G (g_i -> g_{i+1} | g_j);", "D"),
        ],
    )
    def test_classes(self, body, cls):
        c = classify(spec_of(body))
        assert c == CutoffClass(cls)
        assert c.cutoff == {"A": 2, "B": 3, "C": 4, "D": 5}[cls]

    def test_conjunction_takes_largest_class(self, arbiter):
        assert str(classify(arbiter[0])) == "class C, cutoff 4"

    @pytest.mark.parametrize(
        "body",
        [
            "exists i . F g_i;",
            "forall i . G (g_i -> g_{i+2});",
            "forall i . G g_1;",
            "forall i != j . G (g_{i+1} -> g_{j+1} | g_i | g_j);",
        ],
    )
    def test_no_cutoff(self, body):
        with pytest.raises(NoCutoffError):
            classify(spec_of(body))


class TestInstantiation:
    def test_instance_count(self, arbiter):
        # 4*3 ordered pairs plus 4 singletons
        assert len(instances(arbiter[0], 4)) == 16

    def test_successor_wraps_around(self):
        f = instantiate(spec_of("forall i . G (tok_i -> F send_{i+1});"), 3)
        assert "send_1" in atom_keys(f)

    def test_ring_fairness(self, arbiter):
        f = augment_fairness(instantiate(arbiter[0], 2), "ring", 2)
        text = [to_string(c) for c in conjuncts(f)]
        assert "G !(g_1 & g_2)" in text
        assert "G F sched_1 & G F sched_2 -> G (r_1 -> F g_1)" in text
        assert "G F sched_1 & G F sched_2 -> G (tok_2 -> F send_2)" in text

    def test_network_fairness_uses_token_premise(self, arbiter):
        f = augment_fairness(instantiate(arbiter[0], 2), "network", 2)
        assert "G F tok_1 & G F tok_2 -> G (r_1 -> F g_1)" in [to_string(c) for c in conjuncts(f)]

    def test_token_assumption(self, granting):
        f = build_token_assumption(granting[0])
        assert to_string(f) == "G (!tok_1 -> F send_2) & G (tok_1 -> !send_2) -> G (r_1 -> F g_1)"

    def test_token_assumption_needs_class_a(self, arbiter):
        with pytest.raises(SpecError):
            build_token_assumption(arbiter[0])

    def test_site_obligation_is_symmetric(self, arbiter):
        f = site_obligation(arbiter[0], 2)
        text = {to_string(c) for c in conjuncts(f)}
        assert {"G !(g_1 & g_2)", "G !(g_2 & g_1)", "G (r_1 -> F g_1)", "G (r_2 -> F g_2)"} == text

    def test_site_obligation_rejects_offsets(self):
        with pytest.raises(SpecError):
            site_obligation(spec_of("forall i . G (tok_i -> F send_{i+1});"), 2)
