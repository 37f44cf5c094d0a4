"""Conjunctive triple-pattern queries over a knowledge base.

Grammar (keywords are case-insensitive, whitespace between tokens is free)::

    query      := prefixDecl* "SELECT" var+ "WHERE" "{" pattern ("." pattern)* "."? "}"
    prefixDecl := "PREFIX" NAME? ":" "<" IRIREF ">"
    pattern    := term term term
    term       := "?"NAME | NAME? ":" NAME | "<"IRIREF">" | '"'chars'"'

The ``rdf``, ``rdfs``, ``owl`` and ``xsd`` prefixes are predeclared; any
other prefix must have a PREFIX line.

Queries run against the *materialized* graph: the ABox, plus every entity's
types closed under is-a, plus one ``rdfs:subClassOf`` triple per transitive
is-a pair. Solutions keep duplicates and come back sorted bytewise by their
projected values in N-Triples form.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Union

from . import errors
from .errors import ParseError
from .kb import KnowledgeBase
from .rdf import IRI, RDF_TYPE, RDFS_SUBCLASS_OF, STANDARD_PREFIXES, Literal, Term, Triple, term_sort_key

BRUTE_FORCE_MAX_VARS = 4
BRUTE_FORCE_MAX_TERMS = 100


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class PrefixedName:
    prefix: str
    local: str


PatternTerm = Union[Var, PrefixedName, IRI, Literal]


@dataclass(frozen=True)
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def terms(self) -> tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.s, self.p, self.o)

    def variables(self) -> list[str]:
        return [t.name for t in self.terms() if isinstance(t, Var)]


@dataclass
class Query:
    prefixes: dict[str, str]
    projected: list[str]
    patterns: list[TriplePattern]

    def variables(self) -> list[str]:
        return list(dict.fromkeys(v for pat in self.patterns for v in pat.variables()))


BindingRow = dict[str, Term]


# -- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<var>[?$](?P<varname>\w+))
  | (?P<iri><(?P<iriref>[^<>"{}|^`\\\s]*)>)
  | (?P<lit>"(?P<litbody>(?:[^"\\\n]|\\.)*)")
  | (?P<pname>(?P<pfx>[^\W\d][\w-]*)?:(?P<local>\w[\w-]*)?)
  | (?P<word>[^\W\d]\w*)
  | (?P<punct>[{}.])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int
    value: object = None


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        col = pos - line_start + 1
        if m.group("ws"):
            pass
        elif m.group("var"):
            toks.append(_Tok("var", m.group(0), line, col, m.group("varname")))
        elif m.group("iri"):
            toks.append(_Tok("iri", m.group(0), line, col, m.group("iriref")))
        elif m.group("lit"):
            body = re.sub(r"\\(.)", lambda e: {"n": "\n", "t": "\t", "r": "\r"}.get(e.group(1), e.group(1)), m.group("litbody"))
            toks.append(_Tok("lit", m.group(0), line, col, body))
        elif m.group("pname") is not None and m.group("pname") != "":
            toks.append(_Tok("pname", m.group(0), line, col, (m.group("pfx") or "", m.group("local") or "")))
        elif m.group("word"):
            toks.append(_Tok("word", m.group(0), line, col, m.group(0).upper()))
        else:
            toks.append(_Tok("punct", m.group(0), line, col))
        chunk = m.group(0)
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", tok.line, tok.col)

    def keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.value == word

    def expect_keyword(self, word: str) -> None:
        if not self.keyword(word):
            self.fail(f"expected {word}")
        self.next()

    def expect_punct(self, ch: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != ch:
            self.fail(f"expected {ch!r}")
        return self.next()

    def term(self) -> PatternTerm:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.value)
        if tok.kind == "iri":
            return IRI(tok.value)
        if tok.kind == "lit":
            return Literal(tok.value)
        if tok.kind == "pname":
            prefix, local = tok.value
            if not local:
                self.fail("prefixed name needs a local part", tok)
            self.used.append((prefix, tok))
            return PrefixedName(prefix, local)
        self.fail("expected a term", tok)

    def parse(self) -> Query:
        prefixes: dict[str, str] = {}
        self.used: list[tuple[str, _Tok]] = []
        while self.keyword("PREFIX"):
            self.next()
            tok = self.next()
            if tok.kind != "pname" or tok.value[1]:
                self.fail("expected a prefix name ending in ':'", tok)
            iri = self.next()
            if iri.kind != "iri":
                self.fail("expected <IRI>", iri)
            prefixes[tok.value[0]] = iri.value
        self.expect_keyword("SELECT")
        projected = []
        var_toks = []
        while self.peek().kind == "var":
            tok = self.next()
            projected.append(tok.value)
            var_toks.append(tok)
        if not projected:
            self.fail("expected at least one variable after SELECT")
        self.expect_keyword("WHERE")
        self.expect_punct("{")
        patterns = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                if not patterns:
                    self.fail("expected at least one triple pattern")
                break
            s, p, o = self.term(), self.term(), self.term()
            patterns.append(TriplePattern(s, p, o, tok.line, tok.col))
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.text == ".":
                self.next()
                continue
            if not (nxt.kind == "punct" and nxt.text == "}"):
                self.fail("expected '.' or '}'")
        self.expect_punct("}")
        if self.peek().kind != "eof":
            self.fail("expected end of query")
        query = Query(prefixes, projected, patterns)
        mentioned = set(query.variables())
        for tok in var_toks:
            if tok.value not in mentioned:
                raise ParseError(f"projected variable ?{tok.value} does not occur in any pattern", tok.line, tok.col)
        for prefix, tok in self.used:
            if prefix not in prefixes and prefix not in STANDARD_PREFIXES:
                err = errors.UndeclaredPrefix(f"{tok.line}:{tok.col}: prefix {prefix + ':'!r} is not declared")
                err.line, err.col = tok.line, tok.col
                raise err
        return query


def parse_query(text: str) -> Query:
    return _Parser(text).parse()


# -- evaluation --------------------------------------------------------------

def materialize(kb: KnowledgeBase) -> frozenset[Triple]:
    """The graph queries see; cached while ``kb`` is frozen."""
    if kb.frozen and "materialized" in kb._cache:
        return kb._cache["materialized"]
    graph: set[Triple] = set(kb.abox)
    for s, p, o in kb.abox:
        if p == RDF_TYPE:
            cid = kb.concept_for_iri(o)
            if cid is not None:
                for anc in kb.ancestors(cid):
                    graph.add((s, RDF_TYPE, kb.concept_iri(anc)))
    for cid in kb.concepts:
        for anc in kb.ancestors(cid):
            if anc in kb.concepts:
                graph.add((kb.concept_iri(cid), RDFS_SUBCLASS_OF, kb.concept_iri(anc)))
    result = frozenset(graph)
    if kb.frozen:
        kb._cache["materialized"] = result
    return result


def _resolve(term: PatternTerm, query: Query, kb: KnowledgeBase) -> Var | Term:
    if isinstance(term, PrefixedName):
        base = query.prefixes.get(term.prefix, kb.prefixes.get(term.prefix))
        if base is None:
            raise errors.UndeclaredPrefix(f"prefix {term.prefix + ':'!r} is not declared")
        return IRI(base + term.local)
    return term


def _resolved_patterns(kb: KnowledgeBase, query: Query) -> list[tuple]:
    return [tuple(_resolve(t, query, kb) for t in pat.terms()) for pat in query.patterns]


def _sorted_rows(query: Query, solutions) -> list[BindingRow]:
    rows = [tuple(sol[v] for v in query.projected) for sol in solutions]
    rows.sort(key=lambda row: tuple(term_sort_key(t) for t in row))
    return [dict(zip(query.projected, row)) for row in rows]


class _Index:
    def __init__(self, triples):
        self.all = list(triples)
        self.by = ({}, {}, {})
        for t in self.all:
            for pos in range(3):
                self.by[pos].setdefault(t[pos], []).append(t)

    def candidates(self, bound: tuple) -> list:
        best = self.all
        for pos, value in enumerate(bound):
            if value is not None:
                hit = self.by[pos].get(value, [])
                if len(hit) < len(best):
                    best = hit
        return best


def evaluate(kb: KnowledgeBase, query: Query) -> list[BindingRow]:
    """Left-to-right nested-loop join with binding substitution."""
    patterns = _resolved_patterns(kb, query)
    index = _Index(materialize(kb))
    solutions: list[dict[str, Term]] = [{}]
    for pat in patterns:
        extended = []
        for sol in solutions:
            bound = tuple(sol.get(t.name) if isinstance(t, Var) else t for t in pat)
            for triple in index.candidates(bound):
                new = dict(sol)
                for term, value in zip(pat, triple):
                    if isinstance(term, Var):
                        if new.setdefault(term.name, value) != value:
                            break
                    elif term != value:
                        break
                else:
                    extended.append(new)
        solutions = extended
        if not solutions:
            break
    return _sorted_rows(query, solutions)


def brute_force_evaluate(kb: KnowledgeBase, query: Query) -> list[BindingRow]:
    """Reference semantics: try every assignment of graph terms to variables."""
    patterns = _resolved_patterns(kb, query)
    graph = materialize(kb)
    variables = query.variables()
    terms = sorted({t for triple in graph for t in triple}, key=term_sort_key)
    if len(variables) > BRUTE_FORCE_MAX_VARS or len(terms) > BRUTE_FORCE_MAX_TERMS:
        raise errors.TooLarge(
            f"{len(variables)} variables over {len(terms)} terms exceeds the enumeration guard"
        )
    solutions = []
    for values in itertools.product(terms, repeat=len(variables)):
        env = dict(zip(variables, values))
        if all(
            tuple(env[t.name] if isinstance(t, Var) else t for t in pat) in graph
            for pat in patterns
        ):
            solutions.append(env)
    return _sorted_rows(query, solutions)


def type_instances(kb: KnowledgeBase, class_label: str) -> list[IRI]:
    """Entities typed to the class or any of its subclasses, sorted."""
    hits = kb.find_by_label(class_label)
    if not hits and class_label in kb.concepts:
        hits = [class_label]
    if len(hits) != 1:
        raise errors.UnknownLabel(f"{class_label!r} does not name exactly one class")
    target = hits[0]
    found = set()
    for s, p, o in kb.abox:
        if p == RDF_TYPE:
            cid = kb.concept_for_iri(o)
            if cid is not None and kb.is_subclass(cid, target):
                found.add(s)
    return sorted(found)


def render_term(kb: KnowledgeBase, term: Term) -> str:
    """Display form: an entity's label if it has one, else a compact IRI."""
    if isinstance(term, Literal):
        return term.lexical
    label = kb.label_of(term)
    if label is not None:
        return label
    cid = kb.concept_for_iri(term)
    if cid is not None:
        return kb.concepts[cid].label
    return kb.compact(term)
