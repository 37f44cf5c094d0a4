from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import textwrap

import pytest

from facetkb import KnowledgeBase, data_path
from facetkb.cli import main
from facetkb.project import ABOX_FILE, SCHEMA_FILE, load_snapshot, snapshot_lock, write_snapshot

from test_query import PRESIDENT_QUERY

FILES = (SCHEMA_FILE, ABOX_FILE, "competency.json")


def _files(directory):
    return {name: (directory / name).read_bytes() for name in FILES if (directory / name).exists()}


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_build_to_directory(tmp_path, capsys):
    code, out, _ = _run(capsys, "build", data_path("manifest.json"), "-o", tmp_path / "s")
    assert code == 0
    assert set(_files(tmp_path / "s")) == set(FILES)


def test_build_twice_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert _run(capsys, "build", data_path("manifest.json"), "-o", tmp_path / name)[0] == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_build_with_missing_outline(tmp_path, capsys):
    manifest = json.loads(data_path("manifest.json").read_text(encoding="utf-8"))
    for key in ("refactor", "isced", "seed_abox", "competency_questions"):
        del manifest[key]
    manifest["ingest"] = []
    manifest["outline"] = "nowhere.outline"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    code, _, err = _run(capsys, "build", path, "-o", tmp_path / "s")
    assert code == 2
    assert "nowhere.outline" in err


def test_build_with_broken_script(tmp_path, capsys):
    for name in ("manifest.json", "eio_prerefactor.outline", "isced2011.map", "seed_abox.nt",
                 "glasgow_colleges.map", "glasgow_colleges.csv", "competency.json"):
        shutil.copy(data_path(name), tmp_path / name)
    (tmp_path / "eio_refactor.script").write_text("obsolete NoSuchConcept\n", encoding="utf-8")
    assert _run(capsys, "build", tmp_path / "manifest.json", "-o", tmp_path / "s")[0] == 3


def test_query_president(snapshot, capsys, tmp_path):
    qfile = tmp_path / "q.rq"
    qfile.write_text(PRESIDENT_QUERY, encoding="utf-8")
    code, out, _ = _run(capsys, "query", snapshot, "-f", qfile)
    assert code == 0
    assert out == "Person\tOrganization\nMaria Helena Nazaré\tEuropean University Association\n"


def test_query_no_match_prints_header_only(snapshot, capsys):
    code, out, _ = _run(capsys, "query", snapshot, "-q", "SELECT ?x WHERE { ?x rdf:type rdf:Nothing }")
    assert (code, out) == (0, "x\n")


def test_query_syntax_error(snapshot, capsys):
    code, out, err = _run(capsys, "query", snapshot, "-q", "SELECT ?x\nWHERE { ?x ?p }")
    assert code == 2 and out == ""
    assert "2:" in err


def test_query_undeclared_prefix(snapshot, capsys):
    code, _, err = _run(capsys, "query", snapshot, "-q", "SELECT ?x WHERE { ?x EX:p ?o }")
    assert code == 2 and "EX" in err


def test_lint_shipped_snapshot(snapshot, capsys):
    code, out, _ = _run(capsys, "lint", snapshot)
    assert code == 0
    assert out.splitlines()[-1] == "summary errors=0 warnings=0 info=0"


def test_lint_defect_snapshot(defect_snapshot, capsys):
    code, out, _ = _run(capsys, "lint", defect_snapshot)
    assert code == 1
    assert sum(line.startswith("error ") for line in out.splitlines()) == 4
    code, out, _ = _run(capsys, "lint", defect_snapshot, "--json")
    assert code == 1
    assert len([json.loads(line) for line in out.splitlines()]) == 4


def test_lint_missing_path(tmp_path, capsys):
    assert _run(capsys, "lint", tmp_path / "nope")[0] == 2


def test_ingest_and_rerun(snapshot, capsys):
    args = ("ingest", snapshot, data_path("glasgow_schools.map"), data_path("glasgow_schools.csv"))
    code, out, _ = _run(capsys, *args)
    assert code == 0 and "created=3" in out
    after_first = _files(snapshot)
    code, out, _ = _run(capsys, *args)
    assert code == 0 and "created=0 updated=0" in out
    assert _files(snapshot) == after_first


def test_ingest_missing_column(snapshot, capsys, tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("Establishment Name,Establishment Type\nX,Primary\n", encoding="utf-8")
    before = _files(snapshot)
    code, _, err = _run(capsys, "ingest", snapshot, data_path("glasgow_schools.map"), csv)
    assert code == 4 and "MissingColumn" in err
    assert _files(snapshot) == before


def test_ingest_into_missing_snapshot(tmp_path, capsys):
    code = _run(capsys, "ingest", tmp_path / "nope", data_path("glasgow_schools.map"), data_path("glasgow_schools.csv"))[0]
    assert code == 2
    assert not (tmp_path / "nope").exists()


def test_export_formats(snapshot, capsys):
    code, out, _ = _run(capsys, "export", snapshot)
    assert code == 0 and out.encode() == (snapshot / ABOX_FILE).read_bytes()
    code, out, _ = _run(capsys, "export", snapshot, "--format", "outline")
    assert code == 0 and out.encode() == (snapshot / SCHEMA_FILE).read_bytes()


def _recount(snapshot) -> dict[str, int]:
    kb = load_snapshot(snapshot)
    triples = [line for line in (snapshot / ABOX_FILE).read_text(encoding="utf-8").splitlines() if line.strip()]
    edges = sum(1 for c in kb.concepts if kb.parents(c))
    bounded = sum(
        1 for r in kb.relations.values()
        if r.min_objects or r.min_subjects or r.max_objects is not None or r.max_subjects is not None
    )
    return {
        "classCount": len(kb.concepts),
        "attributeFacetCount": len(kb.facets),
        "valueCount": sum(len(f.values) for f in kb.facets.values()),
        "relationDeclCount": len(kb.relations),
        "isAEdgeCount": edges,
        "tripleCount": len(triples),
        "logicalAssertionCount": edges + len(triples) + bounded,
    }


def _stats(capsys, snapshot) -> dict[str, int]:
    code, out, _ = _run(capsys, "stats", snapshot)
    assert code == 0
    return {k: int(v) for k, v in (line.split(": ") for line in out.splitlines())}


def test_stats_match_recount(snapshot, capsys):
    stats = _stats(capsys, snapshot)
    assert stats == _recount(snapshot)
    assert stats["classCount"] >= 12


def test_stats_of_empty_kb(tmp_path, capsys):
    write_snapshot(KnowledgeBase(), tmp_path)
    assert set(_stats(capsys, tmp_path).values()) == {0}


def test_lock_contention_in_process(snapshot, capsys):
    args = ("ingest", snapshot, data_path("glasgow_schools.map"), data_path("glasgow_schools.csv"))
    with snapshot_lock(snapshot):
        code, _, err = _run(capsys, *args)
    assert code == 6 and "locked" in err
    assert _run(capsys, *args)[0] == 0


def test_lock_contention_across_processes(snapshot):
    holder = textwrap.dedent(
        f"""
        import sys, time
        from facetkb.project import snapshot_lock
        with snapshot_lock({str(snapshot)!r}):
            print("held", flush=True)
            sys.stdin.readline()
        """
    )
    proc = subprocess.Popen([sys.executable, "-c", holder], stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
    try:
        assert proc.stdout.readline().strip() == "held"
        done = subprocess.run(
            [sys.executable, "-m", "facetkb.cli", "ingest", str(snapshot),
             str(data_path("glasgow_schools.map")), str(data_path("glasgow_schools.csv"))],
            capture_output=True, text=True, timeout=60,
        )
        assert done.returncode == 6
    finally:
        proc.communicate("\n", timeout=30)


def test_interrupted_write_keeps_previous_snapshot(snapshot, capsys, monkeypatch):
    before = _files(snapshot)

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        main(["ingest", str(snapshot), str(data_path("glasgow_schools.map")), str(data_path("glasgow_schools.csv"))])
    monkeypatch.undo()
    assert _files(snapshot) == before
    assert not [p for p in snapshot.iterdir() if p.name.endswith(".tmp")]
    assert load_snapshot(snapshot).abox


def test_namespace_environment_override(monkeypatch):
    from facetkb.project import load_manifest

    monkeypatch.setenv("FACETKB_NAMESPACE", "http://example.org/other#")
    assert load_manifest(data_path("manifest.json")).namespace == "http://example.org/other#"
    monkeypatch.delenv("FACETKB_NAMESPACE")
    assert load_manifest(data_path("manifest.json")).namespace.endswith("ontology.owl#")
