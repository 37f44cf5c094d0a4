from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facetkb import errors
from facetkb.kb import KnowledgeBase, RelationDecl, normalize_label
from facetkb.rdf import IRI, RDF_TYPE, Literal, dump_ntriples, parse_ntriples

from conftest import EI


@pytest.fixture
def kb() -> KnowledgeBase:
    kb = KnowledgeBase()
    ei = kb.add_concept("Educational Institution", "an institution dedicated to education", "subkind")
    kb.add_concept("Preschool", "for children too young for primary school", "subkind", ei)
    school = kb.add_concept("School", "teaching under teachers", parent=ei)
    kb.add_concept("Primary school", "first stage of basic education")
    kb.add_concept("Tertiary school", "leads to a degree", parent=school)
    kb.add_concept("College", "higher education", parent=ei)
    kb.add_concept("University", "grants degrees", parent=ei)
    person = kb.add_concept("Person", "a human being", "kind")
    kb.add_concept("Student", "enrolled person", "role", person)
    kb.add_concept("Organization", "organized body", "kind")
    kb.add_concept("Alma Mater", "institution graduated from", "role")
    kb.add_concept("Enrolment", "student-institution link", "relator")
    kb.add_concept("Graduation", "graduate-institution link", "relator")
    kb.add_concept("Presidency", "president-organization link", "relator")
    return kb


def test_add_root_and_child(kb):
    assert kb.roots()[0] == "EducationalInstitution"
    assert kb.parent("Preschool") == "EducationalInstitution"
    assert kb.concepts["Preschool"].stereotype == "subkind"


def test_duplicate_label(kb):
    with pytest.raises(errors.DuplicateLabel):
        kb.add_concept("  preschool ", "again")


def test_unknown_and_obsolete_parent(kb):
    with pytest.raises(errors.UnknownParent):
        kb.add_concept("Gymnasium", "x", parent="Nope")
    kb.concepts["College"].obsolete = True
    with pytest.raises(errors.ObsoleteParent):
        kb.add_concept("Art college", "x", parent="College")


def test_ids_are_never_reused(kb):
    kb.remove_concept("Preschool")
    assert kb.add_concept("Preschool", "back") == "Preschool_2"


def test_is_a_rules(kb):
    kb.add_is_a("PrimarySchool", "School")
    assert "School" in kb.ancestors("PrimarySchool")
    kb.remove_is_a("School", "EducationalInstitution")
    with pytest.raises(errors.CycleDetected):
        kb.add_is_a("School", "PrimarySchool")
    kb.add_is_a("School", "EducationalInstitution")
    with pytest.raises(errors.MultipleParents):
        kb.add_is_a("College", "University")
    with pytest.raises(errors.UnknownConcept):
        kb.add_is_a("College", "Nope")


def test_ancestors_nearest_first(kb):
    assert kb.ancestors("TertiarySchool") == ["School", "EducationalInstitution"]
    assert kb.ancestors("EducationalInstitution") == []


def test_attribute_values(kb):
    kb.add_attribute_value("timing", "School", "day", "Day time of the school when it is light")
    kb.add_attribute_value("timing", "School", "night", "evening classes")
    assert [v.label for v in kb.facets["timing"].values] == ["day", "night"]
    with pytest.raises(errors.DuplicateValue):
        kb.add_attribute_value("timing", "School", "day", "again")
    with pytest.raises(errors.ValueClashesWithConcept):
        kb.add_attribute_value("runBy", "School", "school", "clash")
    with pytest.raises(errors.FacetOwnerMismatch):
        kb.add_attribute_value("timing", "College", "evening", "x")


def test_relations(kb):
    kb.declare_relation(RelationDecl("studiedIn", "material", "Student", "EducationalInstitution", via="Enrolment"))
    kb.declare_relation(RelationDecl("graduated", "material", "Person", "AlmaMater", via="Graduation"))
    with pytest.raises(errors.BadStereotype):
        kb.declare_relation(RelationDecl("attends", "material", "Student", "School", via="School"))
    with pytest.raises(errors.RelatorRequired):
        kb.declare_relation(RelationDecl("likes", "material", "Person", "School"))
    with pytest.raises(errors.UnknownConcept):
        kb.declare_relation(RelationDecl("owns", "partitive", "Nope", "School"))
    with pytest.raises(errors.BadCardinality):
        kb.declare_relation(RelationDecl("memberOf", "partitive", "College", "University", min_objects=2, max_objects=1))


def test_assert_triple(kb):
    kb.declare_relation(RelationDecl("PresidentOf", "material", "Person", "Organization", via="Presidency"))
    nazare = kb.add_entity(EI + "nazare", "Person")
    eua = kb.add_entity(EI + "EUA", "Organization")
    t = (nazare, IRI(EI + "PresidentOf"), eua)
    assert kb.assert_triple(t)
    size = len(kb.abox)
    assert not kb.assert_triple(t)
    assert len(kb.abox) == size
    with pytest.raises(errors.UndeclaredPredicate):
        kb.assert_triple((nazare, IRI(EI + "foo"), eua))
    with pytest.raises(errors.UnknownSubject):
        kb.assert_triple((IRI(EI + "ghost"), RDF_TYPE, kb.concept_iri("Person")))
    kb.concepts["Organization"].obsolete = True
    with pytest.raises(errors.ObsoleteClass):
        kb.assert_triple((eua, RDF_TYPE, kb.concept_iri("Organization")))


def test_entities_are_not_classes(kb):
    with pytest.raises(errors.FacetKBError):
        kb.add_entity(kb.concept_iri("School"))


def test_frozen_kb_rejects_writes(kb):
    kb.freeze()
    with pytest.raises(errors.FrozenKB):
        kb.add_concept("Lyceum", "x")
    clone = kb.copy()
    clone.add_concept("Lyceum", "x")
    assert "Lyceum" not in kb.concepts


def test_normalize_label():
    assert normalize_label("  Primary\t  SCHOOL ") == "primary school"


def _fixpoint_ancestors(parent: dict[str, str | None], c: str) -> set[str]:
    out, frontier = set(), {c}
    while True:
        step = {parent[x] for x in frontier if parent[x] is not None} - out
        if not step:
            return out
        out |= step
        frontier = step


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ancestors_match_fixpoint_on_random_forests(seed):
    rng = random.Random(seed)
    kb = KnowledgeBase()
    parent: dict[str, str | None] = {}
    for i in range(20):
        p = rng.choice([None, *parent]) if parent else None
        cid = kb.add_concept(f"node {i}", "g", parent=p)
        parent[cid] = p
    for c in parent:
        anc = kb.ancestors(c)
        assert set(anc) == _fixpoint_ancestors(parent, c)
        assert c not in anc
        # nearest first: each element is the parent of the previous one
        chain = [c, *anc]
        assert all(parent[a] == b for a, b in zip(chain, chain[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_export_import_export_on_random_abox(seed):
    rng = random.Random(seed)
    kb = KnowledgeBase()
    for name in ("A", "B", "C"):
        kb.add_concept(name, "g")
    kb.declare_data_property("score", "integer")
    kb.declare_data_property("note")
    ents = [kb.add_entity(EI + f"e{i}") for i in range(12)]
    while len(kb.abox) < 50:
        s = rng.choice(ents)
        kind = rng.randrange(3)
        if kind == 0:
            kb.assert_triple((s, RDF_TYPE, kb.concept_iri(rng.choice("ABC"))))
        elif kind == 1:
            kb.assert_triple((s, IRI(EI + "score"), Literal(str(rng.randint(-99, 99)), "integer")))
        else:
            kb.assert_triple((s, IRI(EI + "note"), Literal(rng.choice(["x", "é \"q\"", "tab\tend"]) + str(rng.random()))))
    once = dump_ntriples(kb.abox)
    assert set(parse_ntriples(once)) == kb.abox
    assert dump_ntriples(parse_ntriples(once)) == once
