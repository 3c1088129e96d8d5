import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasynth.indexed import parse_spec
from parasynth.lts import behaviourally_equivalent, token_ring_process
from parasynth.smt import INT, And, Eq, Ge, Lt, SmtScript, app
from parasynth.solver import (
    SAT,
    UNKNOWN,
    UNSAT,
    Attempt,
    BoundSchedule,
    ExtractionError,
    NoneWithinSchedule,
    SolverError,
    SolverResult,
    Synthesized,
    extract_process,
    model_violations,
    parse_response,
    ring_problem,
    run_solver,
    single_problem,
    synthesize,
    verify_ring,
)

from conftest import needs_solver

CONTRADICTION = "input r; output g; forall i . G g_i; forall i . G !g_i;"


def tiny_script():
    s = SmtScript()
    s.declare("x", [], INT, bound=4)
    s.declare("f", [INT], INT, bound=4)
    # declared bounds are promises; the caller asserts them
    s.add("range", And(Ge(app("x"), 0), Lt(app("x"), 4)))
    s.add("a", Eq(app("f", app("x")), 3))
    s.queries = [app("x"), app("f", 1)]
    return s


class TestResponses:
    def test_sat_with_values(self):
        res = parse_response("sat\n((x 1) ((f 1) 3))\n", tiny_script())
        assert res.status == SAT
        assert res.model.value("f", (1,)) == 3

    def test_unsat_and_unknown(self):
        assert parse_response("unsat\n(error \"model is not available\")", tiny_script()).status == UNSAT
        res = parse_response("unknown\n", tiny_script())
        assert res.status == UNKNOWN and res.model is None

    @pytest.mark.parametrize(
        "out", ["", "(error \"bad\")", "maybe", "sat\n((x 1))", "sat\n((x 1) ((f 1) foo))", "sat\n((x 1)"]
    )
    def test_malformed(self, out):
        with pytest.raises(SolverError):
            parse_response(out, tiny_script())

    def test_model_presence_is_checked(self):
        with pytest.raises(ValueError):
            SolverResult(SAT)

    def test_zero_timeout_is_unknown(self):
        res = run_solver(tiny_script(), timeout=0)
        assert res.status == UNKNOWN and res.reason == "timeout"

    def test_missing_solver(self):
        with pytest.raises(SolverError, match="cannot start"):
            run_solver(tiny_script(), "/nonexistent/solver -in")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("PARASYNTH_SOLVER", "/nonexistent/other")
        with pytest.raises(SolverError, match="other"):
            run_solver(tiny_script())

    def test_killed_solver(self):
        with pytest.raises(SolverError, match="signal 9"):
            run_solver(tiny_script(), [sys.executable, "-c", "import os, signal; os.kill(os.getpid(), signal.SIGKILL)"])

    @needs_solver
    def test_round_trip(self):
        s = tiny_script()
        s.queries = [app("x")] + [app("f", v) for v in range(4)]
        res = run_solver(s, timeout=30)
        assert res.status == SAT
        assert res.model.value("f", (res.model.value("x", ()),)) == 3


class TestSchedule:
    def test_default_pairs(self):
        assert list(BoundSchedule.default(2, max_local=2)) == [(1, 1), (1, 2), (2, 2), (2, 3), (2, 4)]

    def test_local_only(self):
        assert list(BoundSchedule.local_only(3)) == [(1, 1), (2, 2), (3, 3)]

    def test_parse(self):
        assert list(BoundSchedule.parse("1; 2,4 ;3,6")) == [(1, 1), (2, 4), (3, 6)]

    @pytest.mark.parametrize("text", ["", "a,b", "1,2,3", "2,2;1,1", "0,1"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            BoundSchedule.parse(text)

    @given(st.integers(2, 8), st.integers(1, 5))
    @settings(max_examples=50)
    def test_default_is_increasing_and_complete(self, n, max_local):
        pairs = list(BoundSchedule.default(n, max_local))
        assert len(set(pairs)) == len(pairs)
        for l in range(1, max_local + 1):
            assert {g for ll, g in pairs if ll == l} == set(range(l, l * n + 1))
        # the local bound never decreases along the schedule
        assert [l for l, _ in pairs] == sorted(l for l, _ in pairs)


@needs_solver
class TestSynthesis:
    def test_single_mode_minimal(self, granting):
        res = synthesize(single_problem(*granting), timeout=120)
        assert isinstance(res, Synthesized)
        assert [(a.bound_local, a.status) for a in res.attempts] == [(1, UNSAT), (2, SAT)]
        assert len(res.process.states) == 2
        assert all(v.ok for v in verify_ring(res.process, granting[0], range(2, 5)))

    def test_none_within_schedule(self):
        spec, iface = parse_spec(CONTRADICTION)
        res = synthesize(single_problem(spec, iface), BoundSchedule.parse("1;2;3"), timeout=120)
        assert isinstance(res, NoneWithinSchedule)
        assert not res
        assert [a.status for a in res.attempts] == [UNSAT] * 3

    def test_timeouts_advance_the_schedule(self, granting):
        res = synthesize(single_problem(*granting), BoundSchedule.parse("1;2"), timeout=0)
        assert [a.reason for a in res.attempts] == ["timeout", "timeout"]

    def test_emit_smt(self, granting, tmp_path):
        res = synthesize(single_problem(*granting), BoundSchedule.parse("2"), timeout=120, emit_smt=tmp_path)
        assert (tmp_path / "single_l2_g2.smt2").read_text().startswith("; single process")
        assert res.attempts[0].to_json()["script"].endswith(".smt2")

    def test_tampered_model_is_rejected(self, granting):
        enc = single_problem(*granting).encode(2, 2)
        res = run_solver(enc.script, timeout=120)
        assert model_violations(enc, res.model) == []
        extract_process(enc, res.model)
        it = res.model.value("init_tok", ())
        res.model.set("init_idle", (), it)
        with pytest.raises(ExtractionError):
            extract_process(enc, res.model)

    def test_ring_with_pin_extracts_the_forwarder(self, granting):
        p = ring_problem(*granting, n=3)
        enc = p.encode(2, 3, pin=token_ring_process())
        res = run_solver(enc.script, timeout=120)
        q = extract_process(enc, res.model)
        assert behaviourally_equivalent(q, token_ring_process(), 3)


def test_attempt_json_drops_missing_script():
    assert "script" not in Attempt(1, 1, SAT, 0.1).to_json()
