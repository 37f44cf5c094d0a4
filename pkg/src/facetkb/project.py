"""Project manifests, the build pipeline and on-disk snapshots.

A snapshot is a directory holding ``schema.outline`` (the TBox in outline
form), ``abox.nt`` (sorted N-Triples) and, optionally, ``competency.json``.
Writers take an exclusive lock file in the directory and replace each file
through a temporary file plus :func:`os.replace`, so an interrupted run
leaves the previous file intact.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

from filelock import FileLock, Timeout

from . import errors
from .ingest import IngestReport, ingest_delimited, parse_mapping
from .isced import IscedMapping, parse_isced
from .kb import DEFAULT_NAMESPACE, KnowledgeBase
from .outline import dump_outline, parse_outline
from .rdf import Triple, dump_ntriples, parse_ntriples
from .refactor import RefactorLog, apply_script, parse_script
from .validate import CompetencyQuestion, load_questions

SCHEMA_FILE = "schema.outline"
ABOX_FILE = "abox.nt"
COMPETENCY_FILE = "competency.json"
LOCK_FILE = ".facetkb.lock"
NAMESPACE_ENV = "FACETKB_NAMESPACE"

EXIT_PARSE = 2
EXIT_REFACTOR = 3
EXIT_BINDING = 4


class BuildError(Exception):
    """A build stage failed; ``exit_code`` tells the CLI how to report it."""

    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


class LockBusy(errors.FacetKBError):
    """Another process holds the snapshot lock."""


@dataclass
class IngestEntry:
    mapping: Path
    data: Path


@dataclass
class ProjectManifest:
    root: Path
    outline: Path
    namespace: str = DEFAULT_NAMESPACE
    prefixes: dict[str, str] = field(default_factory=dict)
    outline_strict: bool = True
    refactor: Path | None = None
    isced: Path | None = None
    seed_abox: Path | None = None
    ingest: list[IngestEntry] = field(default_factory=list)
    competency_questions: Path | None = None
    output: Path | None = None

    def paths(self) -> list[Path]:
        out = [self.outline, self.refactor, self.isced, self.seed_abox, self.competency_questions]
        for entry in self.ingest:
            out += [entry.mapping, entry.data]
        return [p for p in out if p is not None]


def load_manifest(path: str | os.PathLike) -> ProjectManifest:
    """Read a JSON manifest; relative paths are taken from its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BuildError(EXIT_PARSE, f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise BuildError(EXIT_PARSE, f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    root = path.parent

    def rel(key: str) -> Path | None:
        value = raw.get(key)
        return None if value is None else root / value

    if "outline" not in raw:
        raise BuildError(EXIT_PARSE, f"{path}: manifest has no outline entry")
    known = {f.name for f in fields(ProjectManifest)} - {"root"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise BuildError(EXIT_PARSE, f"{path}: unknown manifest key(s) {', '.join(unknown)}")
    manifest = ProjectManifest(
        root=root,
        outline=rel("outline"),
        namespace=os.environ.get(NAMESPACE_ENV) or raw.get("namespace", DEFAULT_NAMESPACE),
        prefixes=dict(raw.get("prefixes", {})),
        outline_strict=bool(raw.get("outline_strict", True)),
        refactor=rel("refactor"),
        isced=rel("isced"),
        seed_abox=rel("seed_abox"),
        ingest=[IngestEntry(root / e["mapping"], root / e["data"]) for e in raw.get("ingest", [])],
        competency_questions=rel("competency_questions"),
        output=rel("output"),
    )
    if "EI" not in manifest.prefixes:
        raise BuildError(EXIT_PARSE, f"{path}: the prefix map must declare EI")
    for p in manifest.paths():
        if not p.is_file():
            raise BuildError(EXIT_PARSE, f"{path}: referenced file {p} does not exist")
    return manifest


@dataclass
class BuildResult:
    kb: KnowledgeBase
    refactor_log: RefactorLog | None
    isced: IscedMapping | None
    ingest_reports: list[IngestReport]
    questions: list[CompetencyQuestion]
    competency_text: str | None


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _where(path: Path, exc: Exception) -> str:
    return f"{path}: {exc}"


def load_abox(kb: KnowledgeBase, triples: list[Triple]) -> None:
    """Assert triples with full checks, minting each subject first."""
    for s, _, _ in triples:
        if s not in kb.entities:
            kb.add_entity(s)
    for t in triples:
        kb.assert_triple(t)


def build(manifest: ProjectManifest) -> BuildResult:
    """Outline, refactor script, ISCED binding, seed ABox, ingests, in order."""
    kb = KnowledgeBase(manifest.namespace, manifest.prefixes)
    try:
        parse_outline(_read(manifest.outline), kb, strict=manifest.outline_strict)
    except errors.FacetKBError as exc:
        raise BuildError(EXIT_PARSE, _where(manifest.outline, exc)) from exc
    # the outline may carry its own namespace; the manifest (or env) wins
    kb.namespace = manifest.namespace
    kb.prefixes.update(manifest.prefixes)

    log = None
    if manifest.refactor is not None:
        try:
            actions = parse_script(_read(manifest.refactor))
        except errors.ParseError as exc:
            raise BuildError(EXIT_PARSE, _where(manifest.refactor, exc)) from exc
        try:
            log = apply_script(kb, actions)
        except errors.RefactorError as exc:
            raise BuildError(EXIT_REFACTOR, _where(manifest.refactor, exc)) from exc

    mapping = None
    if manifest.isced is not None:
        try:
            mapping = parse_isced(_read(manifest.isced))
        except errors.ParseError as exc:
            raise BuildError(EXIT_PARSE, _where(manifest.isced, exc)) from exc
        try:
            mapping.bind(kb)
        except errors.FacetKBError as exc:
            raise BuildError(EXIT_BINDING, _where(manifest.isced, exc)) from exc

    if manifest.seed_abox is not None:
        try:
            triples = parse_ntriples(_read(manifest.seed_abox))
        except errors.ParseError as exc:
            raise BuildError(EXIT_PARSE, _where(manifest.seed_abox, exc)) from exc
        try:
            load_abox(kb, triples)
        except errors.FacetKBError as exc:
            raise BuildError(EXIT_BINDING, _where(manifest.seed_abox, exc)) from exc

    reports = []
    for entry in manifest.ingest:
        try:
            spec = parse_mapping(_read(entry.mapping))
        except errors.ParseError as exc:
            raise BuildError(EXIT_PARSE, _where(entry.mapping, exc)) from exc
        try:
            reports.append(ingest_delimited(kb, spec, _read(entry.data)))
        except errors.FacetKBError as exc:
            raise BuildError(EXIT_BINDING, _where(entry.data, exc)) from exc

    questions, cq_text = [], None
    if manifest.competency_questions is not None:
        cq_text = _read(manifest.competency_questions)
        try:
            questions = load_questions(cq_text)
        except (errors.FacetKBError, ValueError, KeyError) as exc:
            raise BuildError(EXIT_PARSE, _where(manifest.competency_questions, exc)) from exc
    return BuildResult(kb, log, mapping, reports, questions, cq_text)


# -- snapshots ------------------------------------------------------------------

@contextmanager
def snapshot_lock(directory: str | os.PathLike):
    """Exclusive, non-blocking lock on a snapshot directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(directory / LOCK_FILE), timeout=0)
    try:
        lock.acquire()
    except Timeout:
        raise LockBusy(f"snapshot {directory} is locked by another process") from None
    try:
        yield
    finally:
        lock.release()


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(kb: KnowledgeBase, directory: str | os.PathLike, competency_text: str | None = None) -> None:
    """Write schema first, then ABox; caller holds the snapshot lock."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write(directory / SCHEMA_FILE, dump_outline(kb))
    atomic_write(directory / ABOX_FILE, dump_ntriples(kb.abox))
    if competency_text is not None:
        atomic_write(directory / COMPETENCY_FILE, competency_text)


def save_snapshot(kb: KnowledgeBase, directory: str | os.PathLike, competency_text: str | None = None) -> None:
    with snapshot_lock(directory):
        write_snapshot(kb, directory, competency_text)


def load_snapshot(directory: str | os.PathLike) -> KnowledgeBase:
    """Load leniently, so defective snapshots can still be linted."""
    directory = Path(directory)
    schema, abox = directory / SCHEMA_FILE, directory / ABOX_FILE
    for p in (schema, abox):
        if not p.is_file():
            raise FileNotFoundError(f"{p} does not exist")
    kb = parse_outline(_read(schema), strict=False)
    for t in parse_ntriples(_read(abox)):
        if kb.concept_for_iri(t[0]) is None:
            kb.assert_triple(t, strict=False)
        else:
            kb.abox.add(t)
    return kb


def load_snapshot_questions(directory: str | os.PathLike) -> list[CompetencyQuestion]:
    path = Path(directory) / COMPETENCY_FILE
    return load_questions(_read(path)) if path.is_file() else []


@dataclass(frozen=True)
class StatsSummary:
    """Size counters; ``logical_assertion_count`` is is-a edges plus ABox
    triples plus relation declarations that carry a cardinality bound."""

    class_count: int
    attribute_facet_count: int
    value_count: int
    relation_decl_count: int
    is_a_edge_count: int
    triple_count: int
    logical_assertion_count: int

    @classmethod
    def of(cls, kb: KnowledgeBase) -> StatsSummary:
        edges = len(kb.isa_edges)
        triples = len(kb.abox)
        bounded = sum(1 for r in kb.relations.values() if r.has_cardinality())
        return cls(
            class_count=len(kb.concepts),
            attribute_facet_count=len(kb.facets),
            value_count=sum(len(f.values) for f in kb.facets.values()),
            relation_decl_count=len(kb.relations),
            is_a_edge_count=edges,
            triple_count=triples,
            logical_assertion_count=edges + triples + bounded,
        )

    def lines(self) -> list[str]:
        names = {
            "class_count": "classCount",
            "attribute_facet_count": "attributeFacetCount",
            "value_count": "valueCount",
            "relation_decl_count": "relationDeclCount",
            "is_a_edge_count": "isAEdgeCount",
            "triple_count": "tripleCount",
            "logical_assertion_count": "logicalAssertionCount",
        }
        return [f"{names[f.name]}: {getattr(self, f.name)}" for f in fields(self)]
