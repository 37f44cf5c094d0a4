"""Faceted schema (TBox) and entity data (ABox) in one mutable container.

Concepts form a forest under ``is-a``: every concept has at most one parent and
there are no cycles. Attribute facets hang enumerated values off a concept;
a value label may never coincide with a concept label. Relations are typed
binary predicates whose cardinalities are checked by the validator.

The ``strict=False`` paths exist so that imported or hand-built defective data
can be loaded and then reported on; everything else goes through the checks.
"""

from __future__ import annotations

import copy
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from . import errors
from .rdf import (
    DATATYPES,
    IRI,
    RDF_TYPE,
    RDFS_LABEL,
    STANDARD_PREFIXES,
    Literal,
    Term,
    Triple,
)

DEFAULT_NAMESPACE = "http://www.semanticweb.org/ontologies/2013/12/ontology.owl#"

STEREOTYPES = ("kind", "subkind", "role", "relator", "phase-unspecified")
RELATION_KINDS = ("isA", "material", "partitive")
RESERVED_PREDICATES = frozenset({RDF_TYPE, RDFS_LABEL})


def normalize_label(label: str) -> str:
    """Case-fold and collapse runs of whitespace."""
    return " ".join(label.casefold().split())


def _camel_id(label: str) -> str:
    ascii_label = unicodedata.normalize("NFKD", label).encode("ascii", "ignore").decode()
    ascii_label = re.sub(r"['’]", "", ascii_label)
    parts = re.findall(r"[0-9A-Za-z]+", ascii_label)
    ident = "".join(p[0].upper() + p[1:] for p in parts) or "Concept"
    if ident[0].isdigit():
        ident = "C" + ident
    return ident


@dataclass
class Concept:
    id: str
    label: str
    gloss: str = ""
    synonyms: list[str] = field(default_factory=list)
    stereotype: str = "subkind"
    obsolete: bool = False
    provenance: str = ""
    rank: int | None = None

    def all_labels(self) -> list[str]:
        return [self.label, *self.synonyms]


@dataclass
class AttributeValue:
    label: str
    gloss: str = ""
    synonyms: list[str] = field(default_factory=list)


@dataclass
class AttributeFacet:
    name: str
    attached_to: str
    values: list[AttributeValue] = field(default_factory=list)

    def value(self, label: str) -> AttributeValue | None:
        key = normalize_label(label)
        for v in self.values:
            if normalize_label(v.label) == key:
                return v
        return None


@dataclass
class RelationDecl:
    """A typed binary relation from ``domain`` to ``range``.

    ``min_objects``/``max_objects`` bound how many objects one subject may
    have; ``min_subjects``/``max_subjects`` bound how many subjects may point
    at one object. ``None`` as a maximum means unbounded.
    """

    name: str
    kind: str
    domain: str
    range: str
    via: str | None = None
    min_objects: int = 0
    max_objects: int | None = None
    min_subjects: int = 0
    max_subjects: int | None = None

    def has_cardinality(self) -> bool:
        return bool(
            self.min_objects
            or self.min_subjects
            or self.max_objects is not None
            or self.max_subjects is not None
        )


class KnowledgeBase:
    def __init__(self, namespace: str = DEFAULT_NAMESPACE, prefixes: dict[str, str] | None = None):
        self.namespace = namespace
        self.prefixes: dict[str, str] = dict(STANDARD_PREFIXES)
        if prefixes:
            self.prefixes.update(prefixes)
        self.concepts: dict[str, Concept] = {}
        # child -> ordered parents; a valid KB has at most one per child
        self._parents: dict[str, list[str]] = {}
        self.facets: dict[str, AttributeFacet] = {}
        self.relations: dict[str, RelationDecl] = {}
        self.data_properties: dict[IRI, str] = {}
        self.entities: dict[IRI, None] = {}
        self.abox: set[Triple] = set()
        self._issued_ids: set[str] = set()
        self._frozen = False
        self._cache: dict = {}

    # -- lifecycle ---------------------------------------------------------

    def freeze(self) -> KnowledgeBase:
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def _mutating(self) -> None:
        if self._frozen:
            raise errors.FrozenKB("knowledge base is frozen")
        self._cache.clear()

    def copy(self) -> KnowledgeBase:
        """Unfrozen deep copy."""
        clone = copy.deepcopy(self)
        clone._frozen = False
        clone._cache = {}
        return clone

    def _restore(self, other: KnowledgeBase) -> None:
        self.__dict__.update(copy.deepcopy(other).__dict__)

    # -- identifiers -------------------------------------------------------

    def mint_concept_id(self, label: str) -> str:
        base = _camel_id(label)
        ident, n = base, 1
        while ident in self._issued_ids:
            n += 1
            ident = f"{base}_{n}"
        return ident

    def concept_iri(self, concept_id: str) -> IRI:
        return IRI(self.namespace + concept_id)

    def concept_for_iri(self, iri: Term) -> str | None:
        if isinstance(iri, IRI) and iri.startswith(self.namespace):
            local = iri[len(self.namespace):]
            if local in self.concepts:
                return local
        return None

    def expand(self, name: str) -> IRI:
        """Turn a bare name, ``prefix:local`` or absolute IRI into an IRI."""
        if name.startswith("<") and name.endswith(">"):
            return IRI(name[1:-1])
        if "://" in name or name.startswith("urn:"):
            return IRI(name)
        if ":" in name:
            prefix, local = name.split(":", 1)
            if prefix not in self.prefixes:
                raise errors.UndeclaredPrefix(f"prefix {prefix!r} is not declared")
            return IRI(self.prefixes[prefix] + local)
        return IRI(self.namespace + name)

    def compact(self, iri: IRI) -> str:
        best = None
        for prefix, base in sorted(self.prefixes.items()):
            if iri.startswith(base) and (best is None or len(base) > len(best[1])):
                best = (prefix, base)
        if best is None:
            return f"<{iri}>"
        return f"{best[0]}:{iri[len(best[1]):]}"

    # -- concept lookup ----------------------------------------------------

    def concept(self, concept_id: str) -> Concept:
        try:
            return self.concepts[concept_id]
        except KeyError:
            raise errors.UnknownConcept(f"unknown concept {concept_id!r}") from None

    def _require(self, *ids: str) -> None:
        for cid in ids:
            if cid not in self.concepts:
                raise errors.UnknownConcept(f"unknown concept {cid!r}")

    def find_by_label(self, label: str, synonyms: bool = True) -> list[str]:
        """Concept ids whose preferred label (or synonym) matches ``label``."""
        key = normalize_label(label)
        hits = [c.id for c in self.concepts.values() if normalize_label(c.label) == key]
        if hits or not synonyms:
            return hits
        return [
            c.id for c in self.concepts.values()
            if any(normalize_label(s) == key for s in c.synonyms)
        ]

    def resolve(self, ref: str) -> str:
        """Resolve a concept id or a unique label/synonym to a concept id."""
        if ref in self.concepts:
            return ref
        hits = self.find_by_label(ref)
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise errors.UnknownConcept(f"no concept with id or label {ref!r}")
        raise errors.UnknownConcept(f"label {ref!r} is ambiguous: {', '.join(hits)}")

    def concept_labels(self) -> set[str]:
        return {normalize_label(c.label) for c in self.concepts.values()}

    def value_labels(self) -> set[str]:
        return {normalize_label(v.label) for f in self.facets.values() for v in f.values}

    # -- concepts ----------------------------------------------------------

    def add_concept(
        self,
        label: str,
        gloss: str = "",
        stereotype: str | None = None,
        parent: str | None = None,
        *,
        synonyms: Iterable[str] = (),
        provenance: str = "",
        obsolete: bool = False,
        rank: int | None = None,
        concept_id: str | None = None,
        strict: bool = True,
    ) -> str:
        self._mutating()
        if not label or not label.strip():
            raise ValueError("concept label must be nonempty")
        if stereotype is None:
            stereotype = "subkind" if parent is not None else "kind"
        if stereotype not in STEREOTYPES:
            raise errors.BadStereotype(f"unknown stereotype {stereotype!r}")
        key = normalize_label(label)
        if strict:
            if key in self.concept_labels():
                raise errors.DuplicateLabel(f"a concept labelled {label!r} already exists")
            if key in self.value_labels():
                raise errors.ValueClashesWithConcept(f"{label!r} is already an attribute value")
        if parent is not None:
            if parent not in self.concepts:
                raise errors.UnknownParent(f"unknown parent {parent!r}")
            if strict and self.concepts[parent].obsolete:
                raise errors.ObsoleteParent(f"parent {parent!r} is obsolete")
        if concept_id is None:
            concept_id = self.mint_concept_id(label)
        elif concept_id in self._issued_ids:
            raise errors.DuplicateLabel(f"concept id {concept_id!r} was already issued")
        syns: list[str] = []
        seen = {key}
        for s in synonyms:
            if normalize_label(s) not in seen:
                seen.add(normalize_label(s))
                syns.append(s)
        self._issued_ids.add(concept_id)
        self.concepts[concept_id] = Concept(
            concept_id, label, gloss, syns, stereotype, obsolete, provenance, rank
        )
        if parent is not None:
            self._parents[concept_id] = [parent]
        return concept_id

    def parents(self, concept_id: str) -> list[str]:
        return list(self._parents.get(concept_id, ()))

    def parent(self, concept_id: str) -> str | None:
        ps = self._parents.get(concept_id)
        return ps[0] if ps else None

    @property
    def isa_edges(self) -> set[tuple[str, str]]:
        return {(c, p) for c, ps in self._parents.items() for p in ps}

    def iter_isa_edges(self) -> Iterator[tuple[str, str]]:
        """Edges in concept insertion order (deterministic)."""
        seen = set()
        for c in list(self.concepts) + [c for c in self._parents if c not in self.concepts]:
            if c in seen:
                continue
            seen.add(c)
            for p in self._parents.get(c, ()):
                yield c, p

    def add_is_a(self, child: str, parent: str, *, strict: bool = True) -> None:
        self._mutating()
        if strict:
            self._require(child, parent)
            if self._parents.get(child):
                raise errors.MultipleParents(
                    f"{child!r} already has parent {self._parents[child][0]!r}"
                )
            if child == parent or child in self.ancestors(parent):
                raise errors.CycleDetected(f"{child!r} -> {parent!r} would close a cycle")
            if self.concepts[parent].obsolete:
                raise errors.ObsoleteParent(f"parent {parent!r} is obsolete")
        ps = self._parents.setdefault(child, [])
        if parent not in ps:
            ps.append(parent)

    def remove_is_a(self, child: str, parent: str) -> None:
        self._mutating()
        ps = self._parents.get(child, [])
        if parent in ps:
            ps.remove(parent)
        if not ps:
            self._parents.pop(child, None)

    def ancestors(self, concept_id: str) -> list[str]:
        """Transitive parents, nearest first; empty for a root.

        Walks every parent breadth-first, so imported multi-parent or cyclic
        data terminates; ``concept_id`` itself is never included.
        """
        if concept_id not in self.concepts and concept_id not in self._parents:
            raise errors.UnknownConcept(f"unknown concept {concept_id!r}")
        out: list[str] = []
        seen = {concept_id}
        frontier = [concept_id]
        while frontier:
            nxt = []
            for c in frontier:
                for p in self._parents.get(c, ()):
                    if p not in seen:
                        seen.add(p)
                        out.append(p)
                        nxt.append(p)
            frontier = nxt
        return out

    def is_subclass(self, concept_id: str, of: str) -> bool:
        return concept_id == of or of in self.ancestors(concept_id)

    def children(self, concept_id: str) -> list[str]:
        """Direct children in helpful-sequence order: ranked first, then insertion order."""
        kids = [c for c in self.concepts if concept_id in self._parents.get(c, ())]
        return sorted(kids, key=lambda c: (self.concepts[c].rank is None, self.concepts[c].rank or 0))

    def descendants(self, concept_id: str) -> list[str]:
        out, seen = [], {concept_id}
        stack = list(reversed(self.children(concept_id)))
        while stack:
            c = stack.pop()
            if c in seen:
                continue
            seen.add(c)
            out.append(c)
            stack.extend(reversed(self.children(c)))
        return out

    def roots(self) -> list[str]:
        return [c for c in self.concepts if not self._parents.get(c)]

    def remove_concept(self, concept_id: str) -> None:
        """Drop a concept and its own parent edge. Callers handle references."""
        self._mutating()
        self._require(concept_id)
        del self.concepts[concept_id]
        self._parents.pop(concept_id, None)

    def set_rank(self, concept_id: str, rank: int | None) -> None:
        self._mutating()
        self.concept(concept_id).rank = rank

    # -- attribute facets --------------------------------------------------

    def add_attribute_value(
        self,
        facet_name: str,
        owner: str,
        label: str,
        gloss: str = "",
        *,
        synonyms: Iterable[str] = (),
        strict: bool = True,
    ) -> AttributeValue:
        self._mutating()
        if not facet_name or not label:
            raise ValueError("facet name and value label must be nonempty")
        self._require(owner)
        key = normalize_label(label)
        if strict and key in self.concept_labels():
            raise errors.ValueClashesWithConcept(f"{label!r} is a concept label")
        facet = self.facets.get(facet_name)
        if facet is not None and facet.attached_to != owner:
            raise errors.FacetOwnerMismatch(
                f"facet {facet_name!r} is attached to {facet.attached_to!r}, not {owner!r}"
            )
        if facet is not None and facet.value(label) is not None:
            raise errors.DuplicateValue(f"{facet_name!r} already has value {label!r}")
        if facet is None:
            facet = self.facets[facet_name] = AttributeFacet(facet_name, owner)
        syns = [s for s in dict.fromkeys(synonyms) if normalize_label(s) != key]
        value = AttributeValue(label, gloss, syns)
        facet.values.append(value)
        return value

    # -- relations and predicates -----------------------------------------

    def declare_relation(self, decl: RelationDecl, *, strict: bool = True) -> None:
        self._mutating()
        if not decl.name:
            raise ValueError("relation name must be nonempty")
        if decl.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {decl.kind!r}")
        for lo, hi in ((decl.min_objects, decl.max_objects), (decl.min_subjects, decl.max_subjects)):
            if lo < 0 or (hi is not None and (hi < 0 or lo > hi)):
                raise errors.BadCardinality(f"bad cardinality {lo}..{hi} on {decl.name!r}")
        if strict:
            self._require(decl.domain, decl.range)
            if decl.kind == "material" and decl.via is None:
                raise errors.RelatorRequired(f"material relation {decl.name!r} needs a relator")
            if decl.via is not None:
                self._require(decl.via)
                if self.concepts[decl.via].stereotype != "relator":
                    raise errors.BadStereotype(
                        f"{decl.via!r} has stereotype {self.concepts[decl.via].stereotype!r}, "
                        "expected relator"
                    )
        if decl.name in self.relations or decl.name in self.facets:
            raise errors.DuplicateLabel(f"predicate {decl.name!r} already declared")
        self.relations[decl.name] = decl

    def declare_data_property(self, name: str, datatype: str = "string") -> IRI:
        self._mutating()
        if datatype not in DATATYPES:
            raise ValueError(f"unsupported datatype tag {datatype!r}")
        iri = self.expand(name)
        self.data_properties[iri] = datatype
        return iri

    def relation_for(self, predicate: IRI) -> RelationDecl | None:
        if predicate.startswith(self.namespace):
            return self.relations.get(predicate[len(self.namespace):])
        return None

    def facet_for(self, predicate: IRI) -> AttributeFacet | None:
        if predicate.startswith(self.namespace):
            return self.facets.get(predicate[len(self.namespace):])
        return None

    def is_declared_predicate(self, predicate: IRI) -> bool:
        return (
            predicate in RESERVED_PREDICATES
            or predicate in self.data_properties
            or self.relation_for(predicate) is not None
            or self.facet_for(predicate) is not None
        )

    # -- ABox ----------------------------------------------------------------

    def entity_iri(self, local: str) -> IRI:
        return IRI(self.namespace + local)

    def add_entity(self, iri: str, class_id: str | None = None, label: str | None = None) -> IRI:
        self._mutating()
        iri = IRI(iri)
        if self.concept_for_iri(iri) is not None:
            raise errors.FacetKBError(f"{iri} names a concept; entities live only in the ABox")
        self.entities.setdefault(iri, None)
        if class_id is not None:
            self.assert_triple((iri, RDF_TYPE, self.concept_iri(class_id)))
        if label is not None:
            self.assert_triple((iri, RDFS_LABEL, Literal(label)))
        return iri

    def assert_triple(self, triple: Triple, *, strict: bool = True) -> bool:
        """Add a triple; returns ``False`` when it was already present."""
        self._mutating()
        s, p, o = triple
        if strict:
            if s not in self.entities:
                raise errors.UnknownSubject(f"subject {s} has not been minted")
            if not self.is_declared_predicate(p):
                raise errors.UndeclaredPredicate(f"predicate {p} is not declared")
            if p == RDF_TYPE:
                cid = self.concept_for_iri(o)
                if cid is None:
                    raise errors.UnknownConcept(f"{o} is not a class of this knowledge base")
                if self.concepts[cid].obsolete:
                    raise errors.ObsoleteClass(f"class {cid!r} is obsolete")
        else:
            self.entities.setdefault(IRI(s), None)
        if triple in self.abox:
            return False
        self.abox.add((IRI(s), IRI(p), o))
        return True

    def retract_triple(self, triple: Triple) -> bool:
        self._mutating()
        if triple in self.abox:
            self.abox.discard(triple)
            return True
        return False

    def triples(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> list[Triple]:
        return [
            t for t in self.abox
            if (s is None or t[0] == s) and (p is None or t[1] == p) and (o is None or t[2] == o)
        ]

    def types_of(self, entity: IRI) -> list[str]:
        """Concept ids the entity is directly typed to (unknown classes skipped)."""
        out = []
        for _, _, o in self.triples(entity, RDF_TYPE):
            cid = self.concept_for_iri(o)
            if cid is not None:
                out.append(cid)
        return sorted(out)

    def label_of(self, entity: IRI) -> str | None:
        labels = sorted(o.lexical for _, _, o in self.triples(entity, RDFS_LABEL) if isinstance(o, Literal))
        return labels[0] if labels else None
