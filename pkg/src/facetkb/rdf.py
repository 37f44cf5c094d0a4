"""RDF terms and the N-Triples line format."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import ParseError

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"

STANDARD_PREFIXES = {"rdf": RDF, "rdfs": RDFS, "owl": OWL, "xsd": XSD}

DATATYPES = {
    "string": XSD + "string",
    "integer": XSD + "integer",
    "anyURI": XSD + "anyURI",
}
_DATATYPE_TAGS = {iri: tag for tag, iri in DATATYPES.items()}


class IRI(str):
    """An absolute IRI. A plain ``str`` subclass so it hashes and sorts cheaply."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"IRI({str.__repr__(self)})"


RDF_TYPE = IRI(RDF + "type")
RDFS_LABEL = IRI(RDFS + "label")
RDFS_SUBCLASS_OF = IRI(RDFS + "subClassOf")


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str = "string"

    def __post_init__(self):
        if self.datatype not in DATATYPES:
            raise ValueError(f"unsupported datatype tag {self.datatype!r}")
        if self.datatype == "integer" and not re.fullmatch(r"[+-]?[0-9]+", self.lexical):
            raise ValueError(f"not a base-10 integer: {self.lexical!r}")


Term = Union[IRI, Literal]
Triple = tuple[IRI, IRI, Term]


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    return "".join(
        _ESCAPES.get(ch) or (f"\\u{ord(ch):04X}" if ord(ch) < 0x20 or ord(ch) == 0x7F else ch)
        for ch in text
    )


def term_to_nt(term: Term) -> str:
    if isinstance(term, Literal):
        body = f'"{_escape(term.lexical)}"'
        if term.datatype == "string":
            return body
        return f"{body}^^<{DATATYPES[term.datatype]}>"
    return f"<{term}>"


def term_sort_key(term: Term) -> bytes:
    return term_to_nt(term).encode("utf-8")


def triple_to_nt(triple: Triple) -> str:
    s, p, o = triple
    return f"{term_to_nt(s)} {term_to_nt(p)} {term_to_nt(o)} ."


def dump_ntriples(triples: Iterable[Triple]) -> str:
    """Serialize triples one per line, sorted bytewise; empty input gives ``""``."""
    lines = sorted(triple_to_nt(t).encode("utf-8") for t in triples)
    return "".join(line.decode("utf-8") + "\n" for line in lines)


_IRI_RE = re.compile(r"<([^<>\"{}|^`\\\x00-\x20]*)>")
_LIT_RE = re.compile(r'"((?:[^"\\\n\r]|\\.)*)"(?:\^\^<([^<>\s]*)>|@[A-Za-z-]+)?')
_UNESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_SIMPLE_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f", "'": "'"}


def _unescape(text: str, line: int, col: int) -> str:
    def repl(m: re.Match) -> str:
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        ch = m.group(3)
        if ch not in _SIMPLE_UNESCAPES:
            raise ParseError(f"bad escape \\{ch}", line, col + m.start())
        return _SIMPLE_UNESCAPES[ch]

    return _UNESCAPE_RE.sub(repl, text)


def _read_term(text: str, pos: int, line: int, allow_literal: bool) -> tuple[Term, int]:
    m = _IRI_RE.match(text, pos)
    if m:
        return IRI(m.group(1)), m.end()
    if allow_literal:
        m = _LIT_RE.match(text, pos)
        if m:
            lexical = _unescape(m.group(1), line, pos + 2)
            datatype = m.group(2)
            if datatype is None:
                tag = "string"
            elif datatype in _DATATYPE_TAGS:
                tag = _DATATYPE_TAGS[datatype]
            else:
                raise ParseError(f"unsupported datatype <{datatype}>", line, pos + 1)
            try:
                return Literal(lexical, tag), m.end()
            except ValueError as exc:
                raise ParseError(str(exc), line, pos + 1) from None
    if text.startswith("_:", pos):
        raise ParseError("blank nodes are not supported", line, pos + 1)
    raise ParseError("expected a term", line, pos + 1)


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t":
        pos += 1
    return pos


def iter_ntriples(text: str) -> Iterator[tuple[int, Triple]]:
    """Yield ``(line_number, triple)`` for every statement in ``text``."""
    # only LF (optionally CR LF) ends a statement; other code points such as
    # U+2028 may legally appear inside literals
    for lineno, raw in enumerate(text.split("\n"), start=1):
        raw = raw.removesuffix("\r")
        pos = _skip_ws(raw, 0)
        if pos == len(raw) or raw[pos] == "#":
            continue
        s, pos = _read_term(raw, pos, lineno, allow_literal=False)
        pos = _skip_ws(raw, pos)
        p, pos = _read_term(raw, pos, lineno, allow_literal=False)
        pos = _skip_ws(raw, pos)
        o, pos = _read_term(raw, pos, lineno, allow_literal=True)
        pos = _skip_ws(raw, pos)
        if pos >= len(raw) or raw[pos] != ".":
            raise ParseError("expected '.'", lineno, pos + 1)
        pos = _skip_ws(raw, pos + 1)
        if pos < len(raw) and raw[pos] != "#":
            raise ParseError("trailing content after '.'", lineno, pos + 1)
        yield lineno, (s, p, o)


def parse_ntriples(text: str) -> list[Triple]:
    return [t for _, t in iter_ntriples(text)]
