"""Bidirectional mapping between ISCED 2011 levels and schema labels.

Mapping file format, one level per line::

    level <code> :: "<UNESCO term>" :: label1; label2; ...
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import errors
from .kb import KnowledgeBase, normalize_label

LEVEL_CODES = range(0, 9)


@dataclass(frozen=True)
class IscedLevel:
    code: int
    unesco_term: str


@dataclass(frozen=True)
class IscedMapping:
    rows: tuple[tuple[IscedLevel, frozenset[str]], ...]

    def __post_init__(self):
        codes = [level.code for level, _ in self.rows]
        if sorted(codes) != list(LEVEL_CODES):
            raise ValueError(f"levels 0-8 must each appear exactly once, got {sorted(codes)}")
        for level, labels in self.rows:
            if not labels:
                raise ValueError(f"level {level.code} has no labels")

    def level(self, code: int) -> IscedLevel:
        for level, _ in self.rows:
            if level.code == code:
                return level
        raise errors.OutOfRange(f"ISCED level {code} is outside 0..8")

    def eio_labels_for(self, code: int) -> frozenset[str]:
        if code not in LEVEL_CODES:
            raise errors.OutOfRange(f"ISCED level {code} is outside 0..8")
        return next(labels for level, labels in self.rows if level.code == code)

    def levels_for(self, label: str) -> frozenset[int]:
        key = normalize_label(label)
        codes = frozenset(
            level.code for level, labels in self.rows
            if any(normalize_label(lab) == key for lab in labels)
        )
        if not codes:
            raise errors.UnknownLabel(f"{label!r} does not appear in the mapping")
        return codes

    def pairs(self) -> list[tuple[int, str]]:
        return sorted((level.code, lab) for level, labels in self.rows for lab in labels)

    def labels(self) -> set[str]:
        return {lab for _, labels in self.rows for lab in labels}

    def bind(self, kb: KnowledgeBase) -> dict[str, str]:
        """Resolve every label to a concept id (labels and synonyms both count)."""
        resolved = {}
        for label in sorted(self.labels()):
            hits = kb.find_by_label(label)
            if len(hits) != 1:
                problem = "no concept" if not hits else f"{len(hits)} concepts"
                raise errors.UnknownEioLabel(f"ISCED label {label!r} matches {problem}")
            resolved[label] = hits[0]
        return resolved


_LINE_RE = re.compile(r'level\s+(\d+)\s*::\s*"([^"]*)"\s*::\s*(.*)')


def parse_isced(text: str) -> IscedMapping:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.fullmatch(line)
        if not m:
            raise errors.ParseError('expected level <code> :: "<term>" :: labels', lineno, 1)
        labels = frozenset(lab.strip() for lab in m.group(3).split(";") if lab.strip())
        if not labels:
            raise errors.ParseError("a level needs at least one label", lineno, 1)
        rows.append((IscedLevel(int(m.group(1)), m.group(2)), labels))
    try:
        return IscedMapping(tuple(rows))
    except ValueError as exc:
        raise errors.ParseError(str(exc), 0, 0) from None
