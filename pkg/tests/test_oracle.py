"""Dependency formulas, presence assignments, external adapter, cache."""

import os

import pytest

from conftest import load_case
from deadannot import oracle as orc
from deadannot import source_model as sm
from test_source_model import FIXTURE

# ---------------------------------------------------------------------------
# formula parsing
# ---------------------------------------------------------------------------

def test_parse_formula_precedence():
    f = orc.parse_formula("M:assert:0 | M:assert:1 & !M:assert:2")
    assert f.op == "or"
    assert f.args[0] == orc.var("M:assert:0")
    assert f.args[1].op == "and"
    # & binds tighter than |
    assert f.evaluate({"M:assert:0": False, "M:assert:1": True, "M:assert:2": False})
    assert not f.evaluate({"M:assert:0": False, "M:assert:1": True, "M:assert:2": True})
    assert f.evaluate({"M:assert:0": True, "M:assert:1": False, "M:assert:2": True})


def test_parse_formula_parens_consts_and_part_ids():
    f = orc.parse_formula("(true | false) & M:calc:2.h1 & M'x:invariant:0.c3")
    assert f.evaluate({"M:calc:2.h1": True, "M'x:invariant:0.c3": True})
    assert not f.evaluate({"M:calc:2.h1": True})
    assert f.variables() == {"M:calc:2.h1", "M'x:invariant:0.c3"}


def test_parse_formula_missing_variable_reads_absent():
    f = orc.parse_formula("M:assert:0")
    assert f.evaluate({}) is False


@pytest.mark.parametrize(
    "text",
    ["", "M:assert:0 |", "(M:assert:0", "M:assert:0 extra", "&& x", "yes"],
)
def test_parse_formula_errors(text):
    with pytest.raises(orc.OracleConfigError):
        orc.parse_formula(text)


def test_parse_dependency_file():
    text = (
        "# comment line\n"
        "\n"
        "method A = A:assert:0 & A:assert:1   # trailing comment\n"
        "method B = true\n"
    )
    formulas = orc.parse_dependency_file(text)
    assert set(formulas) == {"A", "B"}
    assert formulas["B"] == orc.TRUE


def test_parse_dependency_file_rejects_duplicates_and_garbage():
    with pytest.raises(orc.OracleConfigError) as exc:
        orc.parse_dependency_file("method A = true\nmethod A = false\n")
    assert "duplicate" in str(exc.value)
    with pytest.raises(orc.OracleConfigError):
        orc.parse_dependency_file("methods A = true\n")


def test_formula_helpers():
    assert orc.fand() == orc.TRUE
    assert orc.for_() == orc.FALSE
    assert orc.fnot(orc.TRUE).evaluate({}) is False
    assert orc.fand(orc.var("a:assert:0"), orc.TRUE).has_negation() is False
    assert orc.fnot(orc.var("a:assert:0")).has_negation() is True


# ---------------------------------------------------------------------------
# dependency oracle
# ---------------------------------------------------------------------------

def _pqr_verdict(program, oracle, removed_indices):
    anns = program.method("M").annotations
    spans = [anns[i].span for i in removed_indices]
    outcome = oracle.verify(None, program, sm.EditSet.from_spans(spans))
    return outcome.verdicts["M"]


def test_pqr_truth_table(pqr):
    program, oracle = pqr
    table = {
        (): orc.PASS,
        (0,): orc.PASS,       # Q & R carry the proof
        (1,): orc.PASS,       # P carries it
        (2,): orc.PASS,
        (0, 1): orc.FAIL,
        (0, 2): orc.FAIL,
        (1, 2): orc.PASS,
        (0, 1, 2): orc.FAIL,
    }
    for removed, want in table.items():
        assert _pqr_verdict(program, oracle, removed) == want, removed


def test_failing_method_gets_diagnostic(pqr):
    program, oracle = pqr
    anns = program.method("M").annotations
    outcome = oracle.verify(None, program, sm.EditSet.from_spans([a.span for a in anns]))
    assert [d.method for d in outcome.diagnostics] == ["M"]
    assert outcome.diagnostics[0].message == "dependency formula unsatisfied"
    assert orc.has_error(outcome, "M")
    assert not outcome.passed("M")


def test_monotone_flag():
    plain = orc.DependencyOracle({"A": orc.parse_formula("A:assert:0 | A:assert:1")})
    assert plain.monotone
    negated = orc.DependencyOracle({"A": orc.parse_formula("!A:assert:0")})
    assert not negated.monotone


def test_validate_against_rejects_unknown_ids():
    program = sm.parse("method M()\n{\n  assert true;\n}\n")
    oracle = orc.DependencyOracle({"M": orc.parse_formula("M:assert:5")})
    with pytest.raises(orc.OracleConfigError) as exc:
        oracle.verify(None, program, sm.EditSet.empty())
    assert "unknown id" in str(exc.value)
    # directives for methods not in this program are ignored
    other = orc.DependencyOracle({"Elsewhere": orc.parse_formula("Elsewhere:assert:9")})
    other.validate_against(program)


def test_load_dependency_oracle(tmp_path, pqr):
    program, _ = pqr
    path = tmp_path / "x.deps"
    path.write_text("method M = M:assert:0\n", encoding="utf-8")
    oracle = orc.load_dependency_oracle(str(path), program)
    assert oracle.formulas["M"] == orc.var("M:assert:0")
    path.write_text("method M = M:assert:7\n", encoding="utf-8")
    with pytest.raises(orc.OracleConfigError):
        orc.load_dependency_oracle(str(path), program)


def test_counter_increments_once_per_verify(pqr):
    program, oracle = pqr
    assert oracle.counter.total == 0
    oracle.verify(None, program, sm.EditSet.empty())
    oracle.verify(None, program, sm.EditSet.empty())
    assert oracle.counter.total == 2
    oracle.counter.note_method("M")
    oracle.counter.note_method("M")
    assert oracle.counter.per_method_rounds == {"M": 2}
    oracle.counter.reset()
    assert oracle.counter.total == 0


# ---------------------------------------------------------------------------
# presence assignment
# ---------------------------------------------------------------------------

def test_presence_assignment_parts_and_operators():
    program = sm.parse(FIXTURE, "fixture.dfy")
    calc = program.annotation("Work:calc:5")
    step = calc.parts[0]
    edits = sm.EditSet.from_spans(
        sm.part_removal_spans(program, step.id)  # takes operator and hint too
    )
    assign = orc.presence_assignment(program, edits)
    assert assign["Work:calc:5.s0"] is False
    assert assign["Work:calc:5.o0"] is False
    assert assign["Work:calc:5.h0"] is False
    assert assign["Work:calc:5.h1"] is True
    # an annotation with parts is present only while all parts are
    assert assign["Work:calc:5"] is False
    assert assign["Work:assert:1"] is True


def test_presence_assignment_partial_conjunct():
    program = sm.parse(FIXTURE, "fixture.dfy")
    ann = program.annotation("Work:assert:1")
    spans = sm.conjunct_removal_spans(program, ann, {1})
    assign = orc.presence_assignment(program, sm.EditSet.from_spans(spans))
    assert assign["Work:assert:1.c0"] is True
    assert assign["Work:assert:1.c1"] is False
    assert assign["Work:assert:1.c2"] is True
    assert assign["Work:assert:1"] is False


def test_preflight_marks_methods():
    program = sm.parse(
        "method Good()\n{\n  assert true;\n}\n\nmethod Bad()\n{\n  assert true;\n}\n"
    )
    oracle = orc.DependencyOracle({"Bad": orc.FALSE})
    verified = orc.preflight(oracle, program)
    assert verified == {"Good"}
    assert program.method("Good").initially_verified
    assert not program.method("Bad").initially_verified
    assert program.preflight_done


def test_has_error_requires_a_verdict():
    outcome = orc.VerifierOutcome({"A": orc.PASS})
    assert not orc.has_error(outcome, "A")
    with pytest.raises(KeyError):
        orc.has_error(outcome, "B")
    timed = orc.VerifierOutcome({"A": orc.PASS}, timed_out=True)
    assert orc.has_error(timed, "A")


# ---------------------------------------------------------------------------
# cached oracle
# ---------------------------------------------------------------------------

def test_cached_oracle_reuses_method_verdicts():
    program, inner = load_case("pqr")
    cached = orc.CachedOracle(inner)
    assert cached.needs_text is False
    orc.preflight(cached, program)
    assert inner.counter.total == 1
    # identical presence vector: answered from cache
    cached.verify(None, program, sm.EditSet.empty())
    assert inner.counter.total == 1
    assert cached.counter.total == 2
    # new state: one inner call
    ann = program.annotation("M:assert:0")
    edits = sm.EditSet.from_spans([ann.span])
    cached.verify(None, program, edits)
    assert inner.counter.total == 2
    # repeated state: cache hit again
    cached.verify(None, program, edits)
    assert inner.counter.total == 2


class _TimeoutOnce(orc.VerificationOracle):
    needs_text = False

    def __init__(self):
        super().__init__()
        self.inner_calls = 0

    def _verify(self, program_text, program, edits):
        self.inner_calls += 1
        verdicts = {m.name: orc.PASS for m in program.methods}
        return orc.VerifierOutcome(verdicts, [], 0.0, timed_out=self.inner_calls == 1)


def test_cached_oracle_does_not_cache_timeouts(pqr):
    program, _ = pqr
    inner = _TimeoutOnce()
    cached = orc.CachedOracle(inner)
    first = cached.verify(None, program, sm.EditSet.empty())
    assert first.timed_out
    second = cached.verify(None, program, sm.EditSet.empty())
    assert not second.timed_out
    assert inner.inner_calls == 2
    cached.verify(None, program, sm.EditSet.empty())
    assert inner.inner_calls == 2  # now cached


# ---------------------------------------------------------------------------
# external verifier
# ---------------------------------------------------------------------------

TWO_METHODS = """\
method A()
{
  assert true;
}

method B()
{
  assert true;
}
"""


def _script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + body + "\n", encoding="utf-8")
    path.chmod(0o755)
    return str(path)


def _ext(command, **overrides):
    cfg = {"command": command, "timeout_ms": 5000}
    cfg.update(overrides)
    return orc.ExternalVerifierOracle(orc.ExternalVerifierConfig(**cfg))


def test_external_config_validation():
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig(command=[])
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig(command=["x"], timeout_ms=0)
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig(command=["x"], failure_detect="psychic")
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig(command=["x"], failure_detect="diagnostic_regex")
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig(command=["x"], method_attribution="by_vibes")


def test_external_config_from_json(monkeypatch):
    cfg = orc.ExternalVerifierConfig.from_json('{"command": ["v", "{file}"]}')
    assert cfg.timeout_ms == 10000
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig.from_json("not json")
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig.from_json('["list"]')
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig.from_json('{"command": ["v"], "shiny": 1}')
    monkeypatch.setenv(orc.TIMEOUT_ENV_VAR, "1234")
    cfg = orc.ExternalVerifierConfig.from_json('{"command": ["v"]}')
    assert cfg.timeout_ms == 1234
    monkeypatch.setenv(orc.TIMEOUT_ENV_VAR, "soon")
    with pytest.raises(orc.OracleConfigError):
        orc.ExternalVerifierConfig.from_json('{"command": ["v"]}')


def test_external_exit_code_verdicts(tmp_path):
    program = sm.parse(TWO_METHODS)
    ok = _ext([_script(tmp_path, "ok.sh", "exit 0"), "{file}"])
    outcome = ok.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.PASS, "B": orc.PASS}
    bad = _ext([_script(tmp_path, "bad.sh", "exit 3"), "{file}"])
    outcome = bad.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.FAIL, "B": orc.FAIL}
    assert "exited 3" in outcome.diagnostics[0].message


def test_external_receives_rendered_file(tmp_path):
    program = sm.parse(TWO_METHODS)
    marker = tmp_path / "copy.dfy"
    script = _script(tmp_path, "cap.sh", f'cat "$1" > {marker}; exit 0')
    oracle = _ext([script, "{file}"])
    ann = program.annotation("A:assert:0")
    edits = sm.EditSet.from_spans([ann.span])
    oracle.verify(None, program, edits)
    rendered = marker.read_text(encoding="utf-8")
    assert rendered == sm.print_source(program, edits)


def test_external_regex_by_line_span(tmp_path):
    program = sm.parse(TWO_METHODS)
    # line 8 is inside method B
    script = _script(tmp_path, "diag.sh", 'echo "8: boom"; exit 1')
    oracle = _ext(
        [script, "{file}"],
        failure_detect="diagnostic_regex",
        diagnostic_regex=r"(?P<line>[0-9]+): boom",
    )
    outcome = oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.PASS, "B": orc.FAIL}
    assert outcome.diagnostics[0].line == 8


def test_external_regex_by_name(tmp_path):
    program = sm.parse(TWO_METHODS)
    script = _script(tmp_path, "name.sh", 'echo "method B failed"; exit 1')
    oracle = _ext(
        [script, "{file}"],
        failure_detect="diagnostic_regex",
        diagnostic_regex=r"method (?P<method>[A-Za-z_]+) failed",
        method_attribution="by_name",
    )
    outcome = oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.PASS, "B": orc.FAIL}


def test_external_unattributed_diagnostic_fails_everything(tmp_path):
    program = sm.parse(TWO_METHODS)
    script = _script(tmp_path, "vague.sh", 'echo "999: boom"; exit 1')
    oracle = _ext(
        [script, "{file}"],
        failure_detect="diagnostic_regex",
        diagnostic_regex=r"(?P<line>[0-9]+): boom",
    )
    outcome = oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.FAIL, "B": orc.FAIL}


def test_external_regex_mode_nonzero_exit_without_match_fails_all(tmp_path):
    program = sm.parse(TWO_METHODS)
    script = _script(tmp_path, "silent.sh", "exit 2")
    oracle = _ext(
        [script, "{file}"],
        failure_detect="diagnostic_regex",
        diagnostic_regex=r"(?P<line>[0-9]+): boom",
    )
    outcome = oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.verdicts == {"A": orc.FAIL, "B": orc.FAIL}


def test_external_timeout_fails_conservatively(tmp_path):
    program = sm.parse(TWO_METHODS)
    script = _script(tmp_path, "slow.sh", "sleep 2")
    oracle = _ext([script, "{file}"], timeout_ms=150)
    outcome = oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
    assert outcome.timed_out
    assert orc.has_error(outcome, "A") and orc.has_error(outcome, "B")


def test_external_missing_binary_is_unavailable(tmp_path):
    program = sm.parse(TWO_METHODS)
    oracle = _ext([os.path.join(str(tmp_path), "no-such-verifier"), "{file}"])
    with pytest.raises(orc.OracleUnavailableError):
        oracle.verify(TWO_METHODS, program, sm.EditSet.empty())
