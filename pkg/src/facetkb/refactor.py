"""Schema clean-up operations and the refactor script that sequences them.

Four kinds of action:

* ``merge`` folds redundant concepts into a survivor, which keeps its id and
  takes every absorbed label as a synonym and a hand-written gloss.
* ``demote`` turns a complex concept ("day school") into an attribute value
  ("timing = day") on an owning concept.
* ``deleteIndividual`` removes a proper-named entity from the schema,
  optionally re-creating it in the ABox under its former parent.
* ``markObsolete`` freezes a concept: kept, but it accepts no new children
  and no new instances.

Script file, one action per line::

    merge <survivor> <- <a>,<b> :: "<new gloss>"
    demote <concept> -> <facet>@<owner> = <value> :: "<gloss>"
    delete-individual <concept> :: "<reason>" [keep-entity]
    obsolete <concept>
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import errors
from .ids import slugify
from .kb import KnowledgeBase, normalize_label
from .outline import dump_outline
from .rdf import IRI, RDF_TYPE, Literal, dump_ntriples

ACTION_KINDS = ("merge", "demote", "deleteIndividual", "markObsolete")


@dataclass
class RefactorAction:
    kind: str
    concept: str
    absorbed: tuple[str, ...] = ()
    gloss: str = ""
    facet: str | None = None
    owner: str | None = None
    value: str | None = None
    reason: str = ""
    keep_entity: bool = False
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown refactor action {self.kind!r}")


@dataclass(frozen=True)
class LogRecord:
    action: RefactorAction
    before: str
    after: str
    timestamp: datetime

    @property
    def changed(self) -> bool:
        return self.before != self.after


@dataclass
class RefactorLog:
    _records: list[LogRecord] = field(default_factory=list)

    def append(self, record: LogRecord) -> None:
        self._records.append(record)

    @property
    def records(self) -> tuple[LogRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)


def kb_digest(kb: KnowledgeBase) -> str:
    payload = dump_outline(kb) + "\0" + dump_ntriples(kb.abox)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class _atomic:
    """Restore ``kb`` to its entry state if the block raises."""

    def __init__(self, kb: KnowledgeBase):
        self.kb = kb

    def __enter__(self):
        self.saved = self.kb.copy()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.kb._restore(self.saved)
        return False


def _references(kb: KnowledgeBase, concept_id: str) -> list[str]:
    refs = []
    for r in kb.relations.values():
        if concept_id in (r.domain, r.range, r.via):
            refs.append(f"relation {r.name}")
    for f in kb.facets.values():
        if f.attached_to == concept_id:
            refs.append(f"facet {f.name}")
    return refs


def merge_concepts(kb: KnowledgeBase, survivor: str, absorbed: list[str], new_gloss: str) -> str:
    kb._mutating()
    kb._require(survivor, *absorbed)
    absorbed = list(dict.fromkeys(absorbed))
    if survivor in absorbed:
        raise errors.SelfMerge(f"cannot merge {survivor!r} into itself")
    gone = set(absorbed)

    def sub(cid: str) -> str:
        return survivor if cid in gone else cid

    new_parents: dict[str, list[str]] = {}
    for child, parent in kb.iter_isa_edges():
        c, p = sub(child), sub(parent)
        if c == p:
            raise errors.WouldViolateSingleParent(
                f"merging {child!r} and {parent!r} would make {survivor!r} its own parent"
            )
        ps = new_parents.setdefault(c, [])
        if p not in ps:
            ps.append(p)
    for c, ps in new_parents.items():
        if len(ps) > 1 and len(kb.parents(c)) <= 1:
            raise errors.WouldViolateSingleParent(
                f"after merge {c!r} would have parents {', '.join(ps)}"
            )
    # cycle through the merged node
    cur, seen = survivor, {survivor}
    while new_parents.get(cur):
        cur = new_parents[cur][0]
        if cur in seen:
            raise errors.WouldViolateSingleParent(f"merge would create an is-a cycle through {survivor!r}")
        seen.add(cur)
    if kb.concepts[survivor].obsolete and any(kb.children(a) for a in absorbed):
        raise errors.ObsoleteParent(f"survivor {survivor!r} is obsolete and cannot adopt children")

    keep = kb.concepts[survivor]
    seen_labels = {normalize_label(keep.label)} | {normalize_label(s) for s in keep.synonyms}
    for cid in absorbed:
        for label in kb.concepts[cid].all_labels():
            key = normalize_label(label)
            if key not in seen_labels:
                seen_labels.add(key)
                keep.synonyms.append(label)
    keep.gloss = new_gloss

    kb._parents = new_parents
    for cid in absorbed:
        del kb.concepts[cid]
    for facet in kb.facets.values():
        facet.attached_to = sub(facet.attached_to)
    for r in kb.relations.values():
        r.domain, r.range = sub(r.domain), sub(r.range)
        if r.via is not None:
            r.via = sub(r.via)
    iris = {kb.concept_iri(c): kb.concept_iri(survivor) for c in absorbed}
    if iris:
        kb.abox = {tuple(iris.get(t, t) if isinstance(t, IRI) else t for t in triple) for triple in kb.abox}
    return survivor


def resolve_polysemy(kb: KnowledgeBase, candidates: list[tuple[str, int]]) -> str:
    """Keep the best-ranked sense (lowest rank number) and merge the others into it."""
    if not candidates:
        raise ValueError("no candidates")
    kb._require(*(c for c, _ in candidates))
    if len(candidates) == 1:
        return candidates[0][0]
    labels = {normalize_label(kb.concepts[c].label) for c, _ in candidates}
    if len(labels) != 1:
        raise errors.NotPolysemous(f"candidates do not share a label: {sorted(labels)}")
    ranks = [r for _, r in candidates]
    if len(set(ranks)) != len(ranks):
        raise errors.RankTie(f"candidate ranks are not distinct: {ranks}")
    ordered = sorted(candidates, key=lambda cr: cr[1])
    keep = ordered[0][0]
    with _atomic(kb):
        merge_concepts(kb, keep, [c for c, _ in ordered[1:]], kb.concepts[keep].gloss)
    return keep


def demote_to_attribute_value(
    kb: KnowledgeBase, concept_id: str, facet_name: str, owner: str, value_label: str, gloss: str
) -> None:
    kb._mutating()
    kb._require(concept_id, owner)
    if concept_id == owner:
        raise errors.FacetKBError("a concept cannot own the value it is demoted to")
    if kb.children(concept_id):
        raise errors.HasChildren(f"{concept_id!r} has children: {', '.join(kb.children(concept_id))}")
    refs = _references(kb, concept_id)
    if refs:
        raise errors.ConceptInUse(f"{concept_id!r} is still used by {', '.join(refs)}")
    with _atomic(kb):
        kb.remove_concept(concept_id)
        kb.add_attribute_value(facet_name, owner, value_label, gloss)
        old = kb.concept_iri(concept_id)
        predicate = IRI(kb.namespace + facet_name)
        for s, p, o in [t for t in kb.abox if t[1] == RDF_TYPE and t[2] == old]:
            kb.abox.discard((s, p, o))
            kb.abox.add((s, RDF_TYPE, kb.concept_iri(owner)))
            kb.abox.add((s, predicate, Literal(value_label)))


def delete_individual(kb: KnowledgeBase, concept_id: str, reason: str, keep_entity: bool = False) -> IRI | None:
    """Remove a concept that is really an individual.

    Instances typed to it are retyped to its parent. With ``keep_entity`` the
    individual itself is re-created as an ABox entity of the parent class;
    the new entity's IRI is returned.
    """
    kb._mutating()
    kb._require(concept_id)
    if kb.children(concept_id):
        raise errors.HasChildren(f"{concept_id!r} has children: {', '.join(kb.children(concept_id))}")
    refs = _references(kb, concept_id)
    if refs:
        raise errors.ConceptInUse(f"{concept_id!r} is still used by {', '.join(refs)}")
    concept = kb.concepts[concept_id]
    parent = kb.parent(concept_id)
    if keep_entity and parent is None:
        raise errors.UnknownParent(f"{concept_id!r} has no parent class to re-create it under")
    with _atomic(kb):
        old = kb.concept_iri(concept_id)
        kb.remove_concept(concept_id)
        for t in [t for t in kb.abox if t[1] == RDF_TYPE and t[2] == old]:
            kb.abox.discard(t)
            if parent is not None:
                kb.abox.add((t[0], RDF_TYPE, kb.concept_iri(parent)))
        if keep_entity:
            return kb.add_entity(kb.entity_iri(slugify(concept.label)), parent, label=concept.label)
    return None


def mark_obsolete(kb: KnowledgeBase, concept_id: str) -> None:
    kb._mutating()
    kb.concept(concept_id).obsolete = True


def run_action(kb: KnowledgeBase, action: RefactorAction):
    resolve = kb.resolve
    if action.kind == "merge":
        return merge_concepts(kb, resolve(action.concept), [resolve(a) for a in action.absorbed], action.gloss)
    if action.kind == "demote":
        return demote_to_attribute_value(
            kb, resolve(action.concept), action.facet, resolve(action.owner), action.value, action.gloss
        )
    if action.kind == "deleteIndividual":
        return delete_individual(kb, resolve(action.concept), action.reason, action.keep_entity)
    return mark_obsolete(kb, resolve(action.concept))


def apply_script(kb: KnowledgeBase, actions: list[RefactorAction]) -> RefactorLog:
    """Apply actions in order, each one atomically.

    On failure the KB is left as it was after the last successful action and
    :class:`RefactorError` carries the 1-based index and the partial log.
    """
    log = RefactorLog()
    for index, action in enumerate(actions, start=1):
        before = kb_digest(kb)
        saved = kb.copy()
        try:
            run_action(kb, action)
        except (errors.FacetKBError, ValueError, TypeError) as exc:
            kb._restore(saved)
            err = errors.RefactorError(index, exc)
            err.line = action.line
            err.log = log
            raise err from exc
        log.append(LogRecord(action, before, kb_digest(kb), datetime.now(timezone.utc)))
    return log


_QUOTED = r'"((?:[^"\\]|\\.)*)"'
_MERGE_RE = re.compile(r"merge\s+(.+?)\s*<-\s*(.*?)\s*::\s*" + _QUOTED + r"\s*$")
_DEMOTE_RE = re.compile(r"demote\s+(.+?)\s*->\s*([^@]+?)\s*@\s*(.+?)\s*=\s*(.+?)\s*::\s*" + _QUOTED + r"\s*$")
_DELETE_RE = re.compile(r"delete-individual\s+(.+?)\s*::\s*" + _QUOTED + r"\s*(keep-entity)?\s*$")
_OBSOLETE_RE = re.compile(r"obsolete\s+(.+?)\s*$")


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text)


def parse_script(text: str) -> list[RefactorAction]:
    actions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        col = raw.index(line[0]) + 1
        if m := _MERGE_RE.fullmatch(line):
            absorbed = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
            actions.append(RefactorAction("merge", m.group(1), absorbed, gloss=_unquote(m.group(3)), line=lineno))
        elif m := _DEMOTE_RE.fullmatch(line):
            actions.append(RefactorAction(
                "demote", m.group(1), facet=m.group(2), owner=m.group(3), value=m.group(4),
                gloss=_unquote(m.group(5)), line=lineno,
            ))
        elif m := _DELETE_RE.fullmatch(line):
            actions.append(RefactorAction(
                "deleteIndividual", m.group(1), reason=_unquote(m.group(2)),
                keep_entity=bool(m.group(3)), line=lineno,
            ))
        elif m := _OBSOLETE_RE.fullmatch(line):
            actions.append(RefactorAction("markObsolete", m.group(1).strip('"'), line=lineno))
        else:
            raise errors.ParseError("unrecognised refactor action", lineno, col)
    return actions


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_script(actions: list[RefactorAction]) -> str:
    lines = []
    for a in actions:
        if a.kind == "merge":
            lines.append(f"merge {a.concept} <- {','.join(a.absorbed)} :: {_q(a.gloss)}")
        elif a.kind == "demote":
            lines.append(f"demote {a.concept} -> {a.facet}@{a.owner} = {a.value} :: {_q(a.gloss)}")
        elif a.kind == "deleteIndividual":
            tail = " keep-entity" if a.keep_entity else ""
            lines.append(f"delete-individual {a.concept} :: {_q(a.reason)}{tail}")
        else:
            lines.append(f"obsolete {a.concept}")
    return "".join(line + "\n" for line in lines)
