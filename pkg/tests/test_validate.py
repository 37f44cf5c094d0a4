from __future__ import annotations

import json
import random

import pytest

from facetkb import data_path
from facetkb.project import load_snapshot, load_snapshot_questions
from facetkb.rdf import IRI
from facetkb.validate import (
    RULES,
    CompetencyQuestion,
    Finding,
    check_completeness,
    load_questions,
    run_pitfall_scan,
    validate,
    verify_syntax,
)

from conftest import EI


def _rules(report, severity=None):
    return [f.rule_id for f in report.findings if severity is None or f.severity == severity]


def test_defect_fixture_has_exactly_four_errors(defect_snapshot):
    report = validate(load_snapshot(defect_snapshot).freeze())
    assert sorted((f.rule_id, f.subject) for f in report.errors) == [
        ("domain-range-conflict", "EI:ann"),
        ("duplicate-label", "College"),
        ("isa-cycle", "Alpha"),
        ("missing-annotation", "Seminary"),
    ]
    assert not report.passed


def test_shipped_build_is_clean(built):
    result, snap = built
    report = validate(load_snapshot(snap).freeze(), load_snapshot_questions(snap))
    assert report.findings == []
    assert report.competency_results and all(ok for _, ok in report.competency_results)
    assert report.passed


def test_clean_schema_has_no_findings(eio_kb):
    assert run_pitfall_scan(eio_kb).findings == []


def test_cardinality_violation(eio_kb):
    kb = eio_kb
    c = kb.add_entity(EI + "c", "College")
    for u in ("u1", "u2"):
        kb.assert_triple((c, IRI(EI + "memberOf"), kb.add_entity(EI + u, "University")))
    report = run_pitfall_scan(kb)
    assert [(f.rule_id, f.subject) for f in report.errors] == [("cardinality-violation", "EI:c")]


def test_duplicate_gloss_is_a_warning(eio_kb):
    eio_kb.add_concept("Lyceum", "a secondary school of a certain kind", parent="School")
    eio_kb.add_concept("Gymnasium", "a secondary school of a certain kind", parent="School")
    report = run_pitfall_scan(eio_kb)
    assert [(f.rule_id, f.severity) for f in report.findings if f.severity != "info"] == [("duplicate-gloss", "warning")]
    assert report.passed


def test_complex_concept_warning(eio_kb):
    eio_kb.add_concept("Night school", "school held in the evening", parent="School")
    report = run_pitfall_scan(eio_kb)
    assert [(f.rule_id, f.subject, f.severity) for f in report.findings if f.severity != "info"] == [
        ("complex-concept", "NightSchool", "warning")
    ]


def test_empty_gloss_is_one_missing_annotation(eio_kb):
    eio_kb.add_concept("Lyceum", "  ", parent="School")
    report = run_pitfall_scan(eio_kb)
    assert _rules(report, "error") == ["missing-annotation"]


def test_missing_provenance_is_info_only(eio_kb):
    eio_kb.add_concept("Lyceum", "x", parent="School")
    eio_kb.concepts["Lyceum"].provenance = ""
    report = run_pitfall_scan(eio_kb)
    assert _rules(report) == ["missing-provenance"]
    assert report.passed and report.summary_counts == {"error": 0, "warning": 0, "info": 1}


@pytest.mark.parametrize(
    "fmt, text, subject",
    [
        ("ntriples", "<http://a> <http://b> .\n", "1:"),
        ("query", "SELECT ?x WHERE { }", "1:"),
        ("script", "obsolete School\nfrobnicate\n", "2:"),
        ("mapping", 'source "s"\nkey "A"\nprop "B" -> b : date\n', "3:"),
        ("outline", "School ::\n      ?? broken", ""),
        ("isced", "level 0 ::\n", "1:"),
    ],
)
def test_verify_syntax_reports_position(fmt, text, subject):
    found = verify_syntax(text, fmt)
    assert len(found) == 1 and found[0].rule_id == "syntax-error"
    assert found[0].subject.startswith(subject)


@pytest.mark.parametrize("fmt, name", [("outline", "eio.outline"), ("ntriples", "seed_abox.nt"),
                                       ("script", "eio_refactor.script"), ("isced", "isced2011.map"),
                                       ("mapping", "glasgow_schools.map")])
def test_verify_syntax_accepts_shipped_files(fmt, name):
    assert verify_syntax(data_path(name).read_text(encoding="utf-8"), fmt) == []


def test_verify_syntax_unknown_format():
    with pytest.raises(ValueError):
        verify_syntax("", "turtle")


def test_competency_questions(built):
    kb = built[0].kb
    questions = load_questions(data_path("competency.json").read_text(encoding="utf-8"))
    assert all(ok for _, ok in check_completeness(kb, questions))
    wrong = CompetencyQuestion("wrong", questions[0].query, [["Nobody", "Nothing"]])
    assert check_completeness(kb, [wrong]) == [("wrong", False)]
    assert not validate(kb, [wrong]).passed


def test_bad_expectation_rejected():
    with pytest.raises(ValueError):
        load_questions(json.dumps([{"name": "x", "query": "SELECT ?x WHERE { ?x ?p ?o }", "expect": "some"}]))


def test_jsonl_and_text_forms(defect_snapshot):
    report = validate(load_snapshot(defect_snapshot))
    records = [json.loads(line) for line in report.to_jsonl().splitlines()]
    assert [r["rule_id"] for r in records] == [f.rule_id for f in report.findings]
    assert {r["severity"] for r in records} <= {"error", "warning", "info"}
    assert report.to_text().splitlines()[-1] == "summary errors=4 warnings=0 info=0"


def test_findings_sorted_and_deterministic(defect_snapshot):
    a = validate(load_snapshot(defect_snapshot)).to_text()
    b = validate(load_snapshot(defect_snapshot)).to_text()
    assert a == b
    findings = validate(load_snapshot(defect_snapshot)).findings
    assert findings == sorted(findings)


def test_every_rule_has_a_known_severity():
    assert set(RULES.values()) == {"error", "warning", "info"}
    f = Finding("isa-cycle", "X", "m")
    assert f.severity == "error" and f.line() == "error isa-cycle X :: m"


def test_random_schema_edits_give_sorted_findings(eio_kb):
    rng = random.Random(3)
    for i in range(10):
        eio_kb.add_concept(f"Extra {i}", rng.choice(["", "g", "h"]), parent=rng.choice(sorted(eio_kb.concepts)))
    findings = run_pitfall_scan(eio_kb).findings
    assert findings == sorted(findings)
    assert len(set(findings)) == len(findings)
