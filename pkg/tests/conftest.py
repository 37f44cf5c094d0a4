from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from facetkb import KnowledgeBase, data_path, parse_outline
from facetkb.project import build, load_manifest, write_snapshot

FIXTURES = Path(__file__).parent / "fixtures"
EI = "http://www.semanticweb.org/ontologies/2013/12/ontology.owl#"


@pytest.fixture
def eio_kb() -> KnowledgeBase:
    """The clean shipped schema, no instance data."""
    return parse_outline(data_path("eio.outline").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def built(tmp_path_factory):
    """Build the shipped manifest once; returns (BuildResult, snapshot dir)."""
    out = tmp_path_factory.mktemp("snapshot")
    result = build(load_manifest(data_path("manifest.json")))
    write_snapshot(result.kb, out, result.competency_text)
    return result, out


@pytest.fixture
def snapshot(built, tmp_path) -> Path:
    """A private, writable copy of the shipped snapshot."""
    dest = tmp_path / "snap"
    shutil.copytree(built[1], dest)
    return dest


@pytest.fixture
def defect_snapshot(tmp_path) -> Path:
    dest = tmp_path / "defect"
    shutil.copytree(FIXTURES / "defect", dest)
    return dest


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
