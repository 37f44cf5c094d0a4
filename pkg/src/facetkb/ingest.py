"""Load institution records from CSV into the ABox through a declarative mapping.

Mapping file, one directive per line::

    source "<id>"
    key <col>[, <col>]
    class-column "<col>"
    rule "<substring>" -> "<label>"
    default-class "<label>"
    prop "<col>" -> <predicate> : <string|integer|anyURI>

Rules are case-insensitive literal substring matches against the class
column, first match wins. Entity ids are::

    <namespace><slug(key values joined by a space)>-<8 hex digits>

where the hex digits are the top half of FNV-1a 64 over the UTF-8 bytes of
``source id`` and the key values, joined with U+001F. Parsing a file
(:func:`prepare_rows`) is pure; only :func:`apply_rows` touches the KB.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

from . import errors
from .ids import fnv1a_64, slugify
from .kb import KnowledgeBase
from .rdf import DATATYPES, IRI, RDF_TYPE, Literal, Triple

_SEP = "\x1f"


@dataclass
class MappingSpec:
    source_id: str
    key_columns: list[str]
    class_column: str | None = None
    class_rules: list[tuple[str, str]] = field(default_factory=list)
    property_map: list[tuple[str, str, str]] = field(default_factory=list)
    default_class: str | None = None

    def __post_init__(self):
        if not self.key_columns:
            raise ValueError("a mapping needs at least one key column")

    def columns(self) -> list[str]:
        cols = list(self.key_columns)
        if self.class_column:
            cols.append(self.class_column)
        cols.extend(col for col, _, _ in self.property_map)
        return list(dict.fromkeys(cols))

    def labels(self) -> list[str]:
        labels = [label for _, label in self.class_rules]
        if self.default_class:
            labels.append(self.default_class)
        return labels

    def classify(self, value: str | None) -> str | None:
        if value is not None:
            folded = value.casefold()
            for pattern, label in self.class_rules:
                if pattern.casefold() in folded:
                    return label
        return self.default_class

    def bind(self, kb: KnowledgeBase) -> dict[str, str]:
        resolved = {}
        for label in self.labels():
            hits = kb.find_by_label(label)
            if len(hits) != 1:
                raise errors.UnknownEioLabel(f"mapping label {label!r} does not name exactly one class")
            resolved[label] = hits[0]
        return resolved


@dataclass
class IngestReport:
    rows_read: int = 0
    entities_created: int = 0
    entities_updated: int = 0
    rows_skipped: int = 0
    skipped_rows: list[tuple[int, str]] = field(default_factory=list)

    def skip(self, row_index: int, reason: str) -> None:
        self.rows_skipped += 1
        self.skipped_rows.append((row_index, reason))

    def summary(self) -> str:
        return (
            f"read={self.rows_read} created={self.entities_created} "
            f"updated={self.entities_updated} skipped={self.rows_skipped}"
        )


_Q = r'"((?:[^"\\]|\\.)*)"'
_DIRECTIVES = {
    "source": re.compile(r"source\s+" + _Q),
    "class-column": re.compile(r"class-column\s+" + _Q),
    "rule": re.compile(r"rule\s+" + _Q + r"\s*->\s*" + _Q),
    "default-class": re.compile(r"default-class\s+" + _Q),
    "prop": re.compile(r"prop\s+" + _Q + r"\s*->\s*(\S+?)\s*:\s*(\w+)"),
    "key": re.compile(r"key\s+(.+)"),
}


def parse_mapping(text: str, kb: KnowledgeBase | None = None) -> MappingSpec:
    """Parse a mapping file; with ``kb`` every class label is checked too."""
    source = None
    keys: list[str] = []
    class_column = None
    rules: list[tuple[str, str]] = []
    props: list[tuple[str, str, str]] = []
    default = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word = line.split(None, 1)[0]
        pattern = _DIRECTIVES.get(word)
        m = pattern.fullmatch(line) if pattern else None
        if m is None:
            raise errors.ParseError(f"malformed mapping line starting with {word!r}", lineno, 1)
        unq = [re.sub(r"\\(.)", r"\1", g) if g is not None else None for g in m.groups()]
        if word == "source":
            source = unq[0]
        elif word == "key":
            keys = [k.strip() for k in next(csv.reader([m.group(1)], skipinitialspace=True)) if k.strip()]
            if not keys:
                raise errors.ParseError("key needs at least one column", lineno, 1)
        elif word == "class-column":
            class_column = unq[0]
        elif word == "rule":
            if not unq[0]:
                raise errors.ParseError("empty rule pattern", lineno, 1)
            rules.append((unq[0], unq[1]))
        elif word == "default-class":
            default = unq[0]
        elif word == "prop":
            if unq[2] not in DATATYPES:
                raise errors.ParseError(f"unknown datatype {unq[2]!r}", lineno, 1)
            props.append((unq[0], unq[1], unq[2]))
    if source is None:
        raise errors.ParseError("mapping has no source line", 0, 0)
    if not keys:
        raise errors.ParseError("mapping has no key columns", 0, 0)
    spec = MappingSpec(source, keys, class_column, rules, props, default)
    if kb is not None:
        spec.bind(kb)
    return spec


def mint_entity_id(spec: MappingSpec, row: dict[str, str], namespace: str) -> IRI:
    values = [(row.get(col) or "").strip() for col in spec.key_columns]
    if not all(values):
        raise errors.EmptyKey(f"empty key column in {spec.key_columns}")
    digest = fnv1a_64(_SEP.join([spec.source_id, *values]).encode("utf-8"))
    return IRI(f"{namespace}{slugify(' '.join(values))}-{digest >> 32:08x}")


@dataclass
class PreparedRow:
    index: int
    entity: IRI | None
    class_label: str | None
    values: list[tuple[str, str, str]]
    skip_reason: str | None = None


def prepare_rows(spec: MappingSpec, text: str, namespace: str) -> list[PreparedRow]:
    """Parse and classify every row without touching a knowledge base."""
    if text.startswith("\ufeff"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader)
    except StopIteration:
        raise errors.MissingColumn(f"no header row; expected columns {spec.columns()}") from None
    except csv.Error as exc:
        raise errors.MalformedRow(0, str(exc)) from None
    header = [h.strip() for h in header]
    missing = [col for col in spec.columns() if col not in header]
    if missing:
        raise errors.MissingColumn(f"missing column(s): {', '.join(missing)}")
    rows = []
    index = 0
    while True:
        try:
            cells = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise errors.MalformedRow(index + 1, str(exc)) from None
        if not cells:
            continue
        index += 1
        if len(cells) != len(header):
            raise errors.MalformedRow(index, f"{len(cells)} cells, header has {len(header)}")
        row = dict(zip(header, cells))
        try:
            entity = mint_entity_id(spec, row, namespace)
        except errors.EmptyKey:
            rows.append(PreparedRow(index, None, None, [], "empty key"))
            continue
        label = spec.classify(row.get(spec.class_column) if spec.class_column else None)
        if label is None:
            rows.append(PreparedRow(index, entity, None, [], "no class rule matched"))
            continue
        values = []
        reason = None
        for col, predicate, datatype in spec.property_map:
            cell = row[col].strip()
            if not cell:
                continue
            if datatype == "integer" and not re.fullmatch(r"[+-]?\d+", cell):
                reason = f"column {col!r}: {cell!r} is not an integer"
                break
            values.append((predicate, cell, datatype))
        rows.append(PreparedRow(index, entity, label, values, reason))
    return rows


def apply_rows(kb: KnowledgeBase, spec: MappingSpec, rows: list[PreparedRow]) -> IngestReport:
    """Upsert prepared rows. Identical input leaves the ABox untouched."""
    classes = spec.bind(kb)
    predicates = {pred: kb.declare_data_property(pred, dt) for _, pred, dt in spec.property_map}
    managed = {RDF_TYPE, *predicates.values()}
    report = IngestReport(rows_read=len(rows))
    for row in rows:
        if row.skip_reason:
            report.skip(row.index, row.skip_reason)
            continue
        desired: set[Triple] = {(row.entity, RDF_TYPE, kb.concept_iri(classes[row.class_label]))}
        for predicate, lexical, datatype in row.values:
            desired.add((row.entity, predicates[predicate], Literal(lexical, datatype)))
        if row.entity not in kb.entities:
            kb.add_entity(row.entity)
            for t in desired:
                kb.assert_triple(t)
            report.entities_created += 1
            continue
        current = {t for t in kb.triples(row.entity) if t[1] in managed}
        if current == desired:
            report.skip(row.index, "unchanged")
            continue
        for t in current - desired:
            kb.retract_triple(t)
        for t in desired - current:
            kb.assert_triple(t)
        report.entities_updated += 1
    return report


def ingest_delimited(kb: KnowledgeBase, spec: MappingSpec, text: str) -> IngestReport:
    return apply_rows(kb, spec, prepare_rows(spec, text, kb.namespace))
