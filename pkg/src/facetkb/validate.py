"""Verification (syntax) and validation (consistency, conciseness, completeness).

Every rule has a fixed id and severity. Errors mark broken invariants,
warnings mark merge or demotion candidates, info marks provenance gaps.
Findings are sorted by (rule id, subject, message) so identical KBs give
byte-identical reports.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Union

from . import errors
from .ingest import parse_mapping
from .isced import parse_isced
from .kb import KnowledgeBase, normalize_label
from .outline import parse_outline
from .query import evaluate, parse_query, render_term
from .rdf import IRI, RDF_TYPE, Literal, parse_ntriples
from .refactor import parse_script

RULES: dict[str, str] = {
    "syntax-error": "error",
    "isa-cycle": "error",
    "multi-parent": "error",
    "dangling-reference": "error",
    "domain-range-conflict": "error",
    "relator-arity": "error",
    "role-without-material-relation": "error",
    "cardinality-violation": "error",
    "unknown-class-typing": "error",
    "obsolete-class-typing": "error",
    "undeclared-predicate": "error",
    "unknown-attribute-value": "error",
    "entity-is-class": "error",
    "duplicate-label": "error",
    "redundant-isa": "warning",
    "duplicate-gloss": "warning",
    "complex-concept": "warning",
    "missing-annotation": "error",
    "missing-value-gloss": "warning",
    "missing-provenance": "info",
}
SEVERITIES = ("error", "warning", "info")


@dataclass(frozen=True, order=True)
class Finding:
    rule_id: str
    subject: str
    message: str
    severity: str = field(default="", compare=False)

    def __post_init__(self):
        if self.rule_id not in RULES:
            raise ValueError(f"unregistered rule {self.rule_id!r}")
        if not self.severity:
            object.__setattr__(self, "severity", RULES[self.rule_id])

    def line(self) -> str:
        return f"{self.severity} {self.rule_id} {self.subject} :: {self.message}"


@dataclass
class CompetencyQuestion:
    name: str
    query: str
    expectation: Union[str, list[list[str]]] = "nonEmpty"

    def __post_init__(self):
        parse_query(self.query)


@dataclass
class ValidationReport:
    findings: list[Finding]
    competency_results: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def summary_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SEVERITIES}
        for f in self.findings:
            counts[f.severity] += 1
        return counts

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def passed(self) -> bool:
        return not self.errors and all(ok for _, ok in self.competency_results)

    def to_text(self) -> str:
        lines = [f.line() for f in self.findings]
        lines += [f"competency {name} :: {'pass' if ok else 'fail'}" for name, ok in self.competency_results]
        c = self.summary_counts
        lines.append(f"summary errors={c['error']} warnings={c['warning']} info={c['info']}")
        return "\n".join(lines) + "\n"

    def to_records(self) -> list[dict]:
        records = [{"kind": "finding", **asdict(f)} for f in self.findings]
        records += [{"kind": "competency", "name": n, "passed": ok} for n, ok in self.competency_results]
        return records

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in self.to_records())


# -- verification -----------------------------------------------------------

_PARSERS = {
    "outline": lambda text: parse_outline(text, strict=False),
    "ntriples": parse_ntriples,
    "query": parse_query,
    "mapping": parse_mapping,
    "script": parse_script,
    "isced": parse_isced,
}


def verify_syntax(text: str, fmt: str) -> list[Finding]:
    """One ``syntax-error`` finding at the first failure, or nothing."""
    try:
        parser = _PARSERS[fmt]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(_PARSERS)}") from None
    try:
        parser(text)
    except errors.ParseError as exc:
        return [Finding("syntax-error", f"{exc.line}:{exc.col}", exc.message)]
    except errors.FacetKBError as exc:
        line = exc.line or 0
        return [Finding("syntax-error", f"{line}:{getattr(exc, 'col', 0)}", Exception.__str__(exc))]
    return []


# -- consistency --------------------------------------------------------------

def _subject(kb: KnowledgeBase, term) -> str:
    return kb.compact(term) if isinstance(term, IRI) else repr(term)


def _cycles(kb: KnowledgeBase) -> list[list[str]]:
    nodes = set(kb.concepts) | {c for c, _ in kb.isa_edges}

    def reach(c: str) -> set[str]:
        # everything above c, including c itself when c sits on a cycle
        return {a for p in kb.parents(c) for a in (p, *kb.ancestors(p))}

    reaches = {c: reach(c) for c in nodes}
    on_cycle = {c for c in nodes if c in reaches[c]}
    groups, seen = [], set()
    for c in sorted(on_cycle):
        if c in seen:
            continue
        group = sorted(d for d in on_cycle if d == c or (d in reaches[c] and c in reaches[d]))
        seen.update(group)
        groups.append(group)
    return groups


def _typed_within(kb: KnowledgeBase, entity, concept_id: str) -> bool:
    if not isinstance(entity, IRI):
        return False
    return any(kb.is_subclass(t, concept_id) for t in kb.types_of(entity))


def check_consistency(kb: KnowledgeBase) -> list[Finding]:
    found: list[Finding] = []
    add = found.append

    for group in _cycles(kb):
        add(Finding("isa-cycle", group[0], "is-a cycle through " + " -> ".join(group)))
    for child in sorted({c for c, _ in kb.isa_edges}):
        ps = kb.parents(child)
        if len(ps) > 1:
            add(Finding("multi-parent", child, "has parents " + ", ".join(ps)))

    for child, parent in sorted(kb.isa_edges):
        for end in (child, parent):
            if end not in kb.concepts:
                add(Finding("dangling-reference", end, f"is-a edge {child} -> {parent} names a missing concept"))
    for facet in kb.facets.values():
        if facet.attached_to not in kb.concepts:
            add(Finding("dangling-reference", facet.attached_to, f"facet {facet.name} is attached to a missing concept"))
    for r in kb.relations.values():
        for role, end in (("domain", r.domain), ("range", r.range), ("relator", r.via)):
            if end is not None and end not in kb.concepts:
                add(Finding("dangling-reference", end, f"relation {r.name} {role} is a missing concept"))

    material = [r for r in kb.relations.values() if r.kind == "material"]
    for c in kb.concepts.values():
        if c.stereotype == "relator":
            ends = {e for r in material if r.via == c.id for e in (r.domain, r.range)}
            if len(ends) < 2:
                add(Finding("relator-arity", c.id, f"relator mediates {len(ends)} endpoint(s), needs at least 2"))
        elif c.stereotype == "role":
            if not any(c.id in (r.domain, r.range) for r in material):
                add(Finding("role-without-material-relation", c.id, "role takes part in no material relation"))

    for s, p, o in sorted(kb.abox, key=lambda t: (str(t[0]), str(t[1]), repr(t[2]))):
        subj = _subject(kb, s)
        if kb.concept_for_iri(s) is not None:
            add(Finding("entity-is-class", subj, "a schema class is used as an ABox subject"))
        if not kb.is_declared_predicate(p):
            add(Finding("undeclared-predicate", subj, f"predicate {kb.compact(p)} is not declared"))
            continue
        if p == RDF_TYPE:
            cid = kb.concept_for_iri(o)
            if cid is None:
                add(Finding("unknown-class-typing", subj, f"typed to {_subject(kb, o)}, which is not a class"))
            elif kb.concepts[cid].obsolete:
                add(Finding("obsolete-class-typing", subj, f"typed to obsolete class {cid}"))
            continue
        decl = kb.relation_for(p)
        if decl is not None:
            if decl.domain in kb.concepts and not _typed_within(kb, s, decl.domain):
                add(Finding(
                    "domain-range-conflict", subj,
                    f"{subj} {decl.name} {_subject(kb, o)}: subject is not a {decl.domain} (domain of {decl.name})",
                ))
            if decl.range in kb.concepts and not _typed_within(kb, o, decl.range):
                add(Finding(
                    "domain-range-conflict", subj,
                    f"{subj} {decl.name} {_subject(kb, o)}: object is not a {decl.range} (range of {decl.name})",
                ))
            continue
        facet = kb.facet_for(p)
        if facet is not None:
            if facet.attached_to in kb.concepts and not _typed_within(kb, s, facet.attached_to):
                add(Finding(
                    "domain-range-conflict", subj,
                    f"{subj} {facet.name} {_subject(kb, o)}: subject is not a {facet.attached_to} (owner of {facet.name})",
                ))
            if not isinstance(o, Literal) or facet.value(o.lexical) is None:
                add(Finding("unknown-attribute-value", subj, f"{_subject(kb, o)} is not a value of {facet.name}"))

    for r in kb.relations.values():
        if not r.has_cardinality():
            continue
        pred = IRI(kb.namespace + r.name)
        uses = [t for t in kb.abox if t[1] == pred]
        out_count, in_count = defaultdict(int), defaultdict(int)
        for s, _, o in uses:
            out_count[s] += 1
            in_count[o] += 1
        entities = sorted(kb.entities)
        subjects = set(out_count) | {e for e in entities if r.domain in kb.concepts and _typed_within(kb, e, r.domain)}
        objects = set(in_count) | {e for e in entities if r.range in kb.concepts and _typed_within(kb, e, r.range)}
        for e in sorted(subjects, key=str):
            n = out_count[e]
            if n < r.min_objects or (r.max_objects is not None and n > r.max_objects):
                add(Finding(
                    "cardinality-violation", _subject(kb, e),
                    f"{r.name} has {n} object(s), allowed {r.min_objects}..{r.max_objects if r.max_objects is not None else '*'}",
                ))
        for e in sorted(objects, key=str):
            n = in_count[e]
            if n < r.min_subjects or (r.max_subjects is not None and n > r.max_subjects):
                add(Finding(
                    "cardinality-violation", _subject(kb, e),
                    f"{r.name} has {n} subject(s), allowed {r.min_subjects}..{r.max_subjects if r.max_subjects is not None else '*'}",
                ))
    return sorted(found)


# -- conciseness ----------------------------------------------------------------

def check_conciseness(kb: KnowledgeBase) -> list[Finding]:
    found: list[Finding] = []
    by_label: dict[str, list[str]] = defaultdict(list)
    for c in kb.concepts.values():
        by_label[normalize_label(c.label)].append(c.id)
    for facet in kb.facets.values():
        for v in facet.values:
            by_label[normalize_label(v.label)].append(f"{facet.name}={v.label}")
    for label, owners in sorted(by_label.items()):
        if len(owners) > 1:
            found.append(Finding("duplicate-label", sorted(owners)[0], f"label {label!r} is used by {', '.join(sorted(owners))}"))

    for child, parent in sorted(kb.isa_edges):
        others = [p for p in kb.parents(child) if p != parent]
        if any(p == parent or parent in kb.ancestors(p) for p in others):
            found.append(Finding("redundant-isa", child, f"edge {child} -> {parent} is implied by another path"))

    by_gloss: dict[str, list[str]] = defaultdict(list)
    for c in kb.concepts.values():
        if c.gloss.strip():
            by_gloss[normalize_label(c.gloss)].append(c.id)
    for gloss, ids in sorted(by_gloss.items()):
        if len(ids) > 1:
            found.append(Finding("duplicate-gloss", sorted(ids)[0], f"{', '.join(sorted(ids))} share a gloss; merge candidates"))

    values = [(facet, v) for facet in kb.facets.values() for v in facet.values]
    for c in kb.concepts.values():
        label = normalize_label(c.label)
        context = [a for a in kb.ancestors(c.id) if a in kb.concepts]
        for facet, v in values:
            heads = set(context)
            if facet.attached_to in kb.concepts:
                heads.add(facet.attached_to)
            for head in sorted(heads):
                if label == f"{normalize_label(v.label)} {normalize_label(kb.concepts[head].label)}":
                    found.append(Finding(
                        "complex-concept", c.id,
                        f"{c.label!r} combines value {v.label!r} of {facet.name} with {kb.concepts[head].label!r}; demotion candidate",
                    ))
    return sorted(set(found))


def check_annotations(kb: KnowledgeBase) -> list[Finding]:
    found = []
    for c in kb.concepts.values():
        if not c.gloss.strip():
            found.append(Finding("missing-annotation", c.id, "concept has no gloss"))
        if not c.provenance.strip():
            found.append(Finding("missing-provenance", c.id, "concept has no provenance note"))
    for facet in kb.facets.values():
        for v in facet.values:
            if not v.gloss.strip():
                found.append(Finding("missing-value-gloss", f"{facet.name}={v.label}", "attribute value has no gloss"))
    return sorted(found)


# -- completeness -------------------------------------------------------------

def render_rows(kb: KnowledgeBase, query_text: str) -> list[list[str]]:
    q = parse_query(query_text)
    return [[render_term(kb, row[v]) for v in q.projected] for row in evaluate(kb, q)]


def check_completeness(kb: KnowledgeBase, questions: list[CompetencyQuestion]) -> list[tuple[str, bool]]:
    results = []
    for cq in questions:
        rows = render_rows(kb, cq.query)
        if cq.expectation == "nonEmpty":
            ok = bool(rows)
        else:
            ok = rows == [list(r) for r in cq.expectation]
        results.append((cq.name, ok))
    return results


def load_questions(text: str) -> list[CompetencyQuestion]:
    out = []
    for item in json.loads(text):
        expect = item.get("expect", "nonEmpty")
        if isinstance(expect, dict):
            expect = [list(r) for r in expect["rows"]]
        elif expect != "nonEmpty":
            raise ValueError(f"unknown expectation {expect!r}")
        out.append(CompetencyQuestion(item["name"], item["query"], expect))
    return out


def run_pitfall_scan(kb: KnowledgeBase) -> ValidationReport:
    findings = set(check_consistency(kb)) | set(check_conciseness(kb)) | set(check_annotations(kb))
    return ValidationReport(sorted(findings))


def validate(kb: KnowledgeBase, questions: list[CompetencyQuestion] = ()) -> ValidationReport:
    report = run_pitfall_scan(kb)
    report.competency_results = check_completeness(kb, list(questions))
    return report
