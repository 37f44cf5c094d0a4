"""Facet outline: the human-editable text form of a schema.

Grammar, one construct per line (UTF-8)::

    # comment
    Label [| syn1; syn2] :: gloss          concept; 2 spaces per hierarchy level
      ~ key: value                         metadata for the concept just above
    @attributes <concept>                  opens an attribute section
    - facetName: value [| syn; syn] :: gloss
    @relation <name> <kind> <domain> -> <range> [via <relator>]
              [objects <min>..<max>] [subjects <min>..<max>]
    @property <name> <string|integer|anyURI>
    @isa <child> <parent>                  an edge not expressed by nesting
    @namespace <iri>
    @prefix <name>: <iri>
    @retired <id> [<id> ...]               ids that may never be reissued

Metadata keys are ``id``, ``stereotype``, ``provenance``, ``obsolete`` and
``rank``. Concept references in directives are ids or unique labels; quote
labels that contain spaces.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field

from . import errors
from .errors import ParseError
from .kb import (
    KnowledgeBase,
    RelationDecl,
    STEREOTYPES,
    _camel_id,
)
from .rdf import STANDARD_PREFIXES

_META_KEYS = ("id", "stereotype", "provenance", "obsolete", "rank")


@dataclass
class _ConceptLine:
    line: int
    depth: int
    label: str
    synonyms: list[str]
    gloss: str
    parent: _ConceptLine | None = None
    meta: dict[str, str] = field(default_factory=dict)
    concept_id: str | None = None


@dataclass
class _Directive:
    line: int
    kind: str
    args: list[str]
    owner: str | None = None


def _split_label(body: str, line: int, col: int) -> tuple[str, list[str], str]:
    head, sep, gloss = body.partition("::")
    label, bar, syns = head.partition("|")
    label = label.strip()
    if not label:
        raise ParseError("missing label", line, col)
    synonyms = [s.strip() for s in syns.split(";") if s.strip()] if bar else []
    return label, synonyms, gloss.strip() if sep else ""


def _tokens(text: str, line: int, col: int) -> list[str]:
    try:
        return shlex.split(text, posix=True)
    except ValueError as exc:
        raise ParseError(str(exc), line, col) from None


def _card(text: str, line: int) -> tuple[int, int | None]:
    m = re.fullmatch(r"(\d+)\.\.(\d+|\*)", text)
    if not m:
        raise ParseError(f"bad cardinality {text!r}, expected <min>..<max|*>", line, 1)
    return int(m.group(1)), None if m.group(2) == "*" else int(m.group(2))


def _scan(text: str) -> tuple[list[_ConceptLine], list[_Directive]]:
    concepts: list[_ConceptLine] = []
    directives: list[_Directive] = []
    stack: list[_ConceptLine] = []
    section: str | None = None
    last: _ConceptLine | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if lineno == 1 and raw.startswith("\ufeff"):
            raw = raw[1:]
        if not raw.strip():
            continue
        stripped = raw.lstrip(" \t")
        indent = raw[: len(raw) - len(stripped)]
        if "\t" in indent:
            raise ParseError("tab in indentation; use 2 spaces per level", lineno, indent.index("\t") + 1)
        if stripped.startswith("#"):
            continue
        if len(indent) % 2:
            raise ParseError("indentation must be a multiple of 2 spaces", lineno, len(indent) + 1)
        depth = len(indent) // 2
        col = len(indent) + 1

        if stripped.startswith("~"):
            if last is None or depth != last.depth + 1:
                raise ParseError("metadata line must directly follow its concept, one level deeper", lineno, col)
            key, sep, value = stripped[1:].partition(":")
            key = key.strip()
            if not sep or key not in _META_KEYS:
                raise ParseError(f"bad metadata line, expected one of {', '.join(_META_KEYS)}", lineno, col)
            last.meta[key] = value.strip()
            continue
        last = None

        if stripped.startswith("@"):
            if depth:
                raise ParseError("directives must not be indented", lineno, col)
            word, _, rest = stripped[1:].partition(" ")
            rest = rest.strip()
            stack.clear()
            section = None
            if word == "attributes":
                if not rest:
                    raise ParseError("@attributes needs a concept", lineno, col)
                section = rest[1:-1] if len(rest) > 1 and rest[0] == rest[-1] == '"' else rest
            elif word in ("relation", "property", "isa", "namespace", "prefix", "retired"):
                directives.append(_Directive(lineno, word, _tokens(rest, lineno, col)))
            else:
                raise ParseError(f"unknown directive @{word}", lineno, col)
            continue

        if stripped.startswith("- "):
            if section is None or depth:
                raise ParseError("value line outside an @attributes section", lineno, col)
            facet, sep, body = stripped[2:].partition(":")
            if not sep or not facet.strip():
                raise ParseError("value line must be '- facet: value :: gloss'", lineno, col + 2)
            label, syns, gloss = _split_label(body, lineno, col + 2 + len(facet) + 1)
            directives.append(_Directive(lineno, "value", [facet.strip(), label, gloss, *syns], owner=section))
            continue

        if section is not None:
            section = None
        if depth > len(stack):
            raise ParseError(f"indentation jumps to level {depth} without a parent", lineno, col)
        del stack[depth:]
        label, syns, gloss = _split_label(stripped, lineno, col)
        node = _ConceptLine(lineno, depth, label, syns, gloss, stack[-1] if stack else None)
        concepts.append(node)
        stack.append(node)
        last = node
    return concepts, directives


def _apply(kb: KnowledgeBase, line: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except errors.FacetKBError as exc:
        if exc.line is None or exc.line == 0:
            exc.line = line
        raise
    except ValueError as exc:
        raise ParseError(str(exc), line, 1) from None


def parse_outline(text: str, kb: KnowledgeBase | None = None, *, strict: bool = True) -> KnowledgeBase:
    """Build (or extend) a knowledge base's schema from outline text.

    Grammar errors raise :class:`ParseError` with line and column; schema
    errors (duplicate labels, cycles...) keep their own type with ``line`` set.
    With ``strict=False`` duplicate labels, extra parents and cycles are
    accepted so that the validator can report them.
    """
    concepts, directives = _scan(text)
    if kb is None:
        kb = KnowledgeBase()

    for d in directives:
        if d.kind == "namespace":
            if len(d.args) != 1:
                raise ParseError("@namespace takes one IRI", d.line, 1)
            kb.namespace = d.args[0].strip("<>")
        elif d.kind == "prefix":
            if len(d.args) != 2 or not d.args[0].endswith(":"):
                raise ParseError("@prefix takes 'name: <iri>'", d.line, 1)
            kb.prefixes[d.args[0][:-1]] = d.args[1].strip("<>")
        elif d.kind == "retired":
            kb._issued_ids.update(d.args)

    reserved = {c.meta["id"] for c in concepts if "id" in c.meta}
    for node in concepts:
        for key, value in node.meta.items():
            if key == "stereotype" and value not in STEREOTYPES:
                raise ParseError(f"unknown stereotype {value!r}", node.line, 1)
            if key == "rank" and not re.fullmatch(r"-?\d+", value):
                raise ParseError("rank must be an integer", node.line, 1)
            if key == "obsolete" and value not in ("true", "false"):
                raise ParseError("obsolete must be true or false", node.line, 1)
        cid = node.meta.get("id")
        if cid is None:
            base = _camel_id(node.label)
            cid, n = base, 1
            while cid in kb._issued_ids or cid in reserved:
                n += 1
                cid = f"{base}_{n}"
        node.concept_id = _apply(
            kb, node.line, kb.add_concept,
            node.label,
            node.gloss,
            node.meta.get("stereotype"),
            node.parent.concept_id if node.parent else None,
            synonyms=node.synonyms,
            provenance=node.meta.get("provenance", ""),
            rank=int(node.meta["rank"]) if "rank" in node.meta else None,
            concept_id=cid,
            strict=strict,
        )

    for d in directives:
        if d.kind == "isa":
            if len(d.args) != 2:
                raise ParseError("@isa takes a child and a parent", d.line, 1)
            child = _apply(kb, d.line, kb.resolve, d.args[0])
            parent = _apply(kb, d.line, kb.resolve, d.args[1])
            _apply(kb, d.line, kb.add_is_a, child, parent, strict=strict)

    for d in directives:
        if d.kind == "value":
            owner = _apply(kb, d.line, kb.resolve, d.owner)
            facet, label, gloss, *syns = d.args
            _apply(kb, d.line, kb.add_attribute_value, facet, owner, label, gloss, synonyms=syns, strict=strict)
        elif d.kind == "property":
            if len(d.args) != 2:
                raise ParseError("@property takes a name and a datatype", d.line, 1)
            _apply(kb, d.line, kb.declare_data_property, d.args[0], d.args[1])
        elif d.kind == "relation":
            _apply(kb, d.line, kb.declare_relation, _relation(kb, d), strict=strict)

    for node in concepts:
        if node.meta.get("obsolete") == "true":
            kb.concepts[node.concept_id].obsolete = True
    return kb


def _relation(kb: KnowledgeBase, d: _Directive) -> RelationDecl:
    args = d.args
    if len(args) < 5 or args[3] != "->":
        raise ParseError("@relation takes '<name> <kind> <domain> -> <range> ...'", d.line, 1)
    name, kind, domain, _, range_, *rest = args
    decl = RelationDecl(
        name, kind,
        _apply(kb, d.line, kb.resolve, domain),
        _apply(kb, d.line, kb.resolve, range_),
    )
    while rest:
        if len(rest) < 2:
            raise ParseError(f"dangling {rest[0]!r} in @relation", d.line, 1)
        key, value, *rest = rest
        if key == "via":
            decl.via = _apply(kb, d.line, kb.resolve, value)
        elif key == "objects":
            decl.min_objects, decl.max_objects = _card(value, d.line)
        elif key == "subjects":
            decl.min_subjects, decl.max_subjects = _card(value, d.line)
        else:
            raise ParseError(f"unknown @relation option {key!r}", d.line, 1)
    return decl


def _quote(ref: str) -> str:
    return ref if re.fullmatch(r"[\w.:-]+", ref) else shlex.quote(ref)


def _concept_line(kb: KnowledgeBase, cid: str, depth: int) -> list[str]:
    c = kb.concepts[cid]
    pad = "  " * depth
    head = c.label + (" | " + "; ".join(c.synonyms) if c.synonyms else "")
    lines = [f"{pad}{head} :: {c.gloss}".rstrip()]
    meta = "  " * (depth + 1) + "~ "
    if cid != _camel_id(c.label):
        lines.append(f"{meta}id: {cid}")
    default = "subkind" if kb.parent(cid) is not None else "kind"
    if c.stereotype != default:
        lines.append(f"{meta}stereotype: {c.stereotype}")
    if c.rank is not None:
        lines.append(f"{meta}rank: {c.rank}")
    if c.obsolete:
        lines.append(f"{meta}obsolete: true")
    if c.provenance:
        lines.append(f"{meta}provenance: {c.provenance}")
    return lines


def _card_text(lo: int, hi: int | None) -> str:
    return f"{lo}..{'*' if hi is None else hi}"


def dump_outline(kb: KnowledgeBase) -> str:
    """Serialize the schema part of ``kb`` so that :func:`parse_outline` rebuilds it."""
    out: list[str] = []
    out.append(f"@namespace <{kb.namespace}>")
    for prefix, base in sorted(kb.prefixes.items()):
        if STANDARD_PREFIXES.get(prefix) != base:
            out.append(f"@prefix {prefix}: <{base}>")
    retired = sorted(kb._issued_ids - set(kb.concepts))
    if retired:
        out.append("@retired " + " ".join(retired))

    emitted: set[str] = set()
    nested: set[tuple[str, str]] = set()

    def walk(cid: str, depth: int) -> None:
        emitted.add(cid)
        out.extend(_concept_line(kb, cid, depth))
        for child in kb.children(cid):
            if child not in emitted and kb.parent(child) == cid:
                nested.add((child, cid))
                walk(child, depth + 1)

    for root in kb.roots():
        walk(root, 0)
    # concepts reachable only through a cycle
    for cid in kb.concepts:
        if cid not in emitted:
            walk(cid, 0)
    for child, parent in kb.iter_isa_edges():
        if (child, parent) not in nested:
            out.append(f"@isa {_quote(child)} {_quote(parent)}")

    for facet in kb.facets.values():
        out.append(f"@attributes {facet.attached_to}")
        for v in facet.values:
            head = v.label + (" | " + "; ".join(v.synonyms) if v.synonyms else "")
            out.append(f"- {facet.name}: {head} :: {v.gloss}".rstrip())
    for iri, datatype in sorted(kb.data_properties.items()):
        out.append(f"@property {_quote(kb.compact(iri))} {datatype}")
    for r in kb.relations.values():
        parts = [f"@relation {r.name} {r.kind} {_quote(r.domain)} -> {_quote(r.range)}"]
        if r.via is not None:
            parts.append(f"via {_quote(r.via)}")
        if r.min_objects or r.max_objects is not None:
            parts.append(f"objects {_card_text(r.min_objects, r.max_objects)}")
        if r.min_subjects or r.max_subjects is not None:
            parts.append(f"subjects {_card_text(r.min_subjects, r.max_subjects)}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"
