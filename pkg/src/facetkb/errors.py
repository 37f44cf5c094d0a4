"""Exception hierarchy shared by every facetkb module."""

from __future__ import annotations


class FacetKBError(Exception):
    """Base class for all knowledge-base errors.

    ``line`` is filled in when the error surfaced while reading a text file,
    so callers can report a location without knowing which parser raised.
    """

    line: int | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg


class ParseError(FacetKBError):
    """A text input does not conform to its grammar."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class FrozenKB(FacetKBError):
    pass


# schema construction
class DuplicateLabel(FacetKBError):
    pass


class UnknownConcept(FacetKBError):
    pass


class UnknownParent(UnknownConcept):
    pass


class ObsoleteParent(FacetKBError):
    pass


class MultipleParents(FacetKBError):
    pass


class CycleDetected(FacetKBError):
    pass


class ValueClashesWithConcept(FacetKBError):
    pass


class DuplicateValue(FacetKBError):
    pass


class FacetOwnerMismatch(FacetKBError):
    pass


class RelatorRequired(FacetKBError):
    pass


class BadStereotype(FacetKBError):
    pass


class BadCardinality(FacetKBError):
    pass


# ABox
class UndeclaredPredicate(FacetKBError):
    pass


class UnknownSubject(FacetKBError):
    pass


class ObsoleteClass(FacetKBError):
    pass


# refactoring
class SelfMerge(FacetKBError):
    pass


class WouldViolateSingleParent(FacetKBError):
    pass


class HasChildren(FacetKBError):
    pass


class RankTie(FacetKBError):
    pass


class NotPolysemous(FacetKBError):
    pass


class RefactorError(FacetKBError):
    """An action of a refactor script failed; ``index`` is 1-based."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"action {index} failed: {cause}")
        self.index = index
        self.cause = cause


# isced / labels
class OutOfRange(FacetKBError):
    pass


class UnknownLabel(FacetKBError):
    pass


class UnknownEioLabel(UnknownLabel):
    pass


# query
class UndeclaredPrefix(FacetKBError):
    pass


class TooLarge(FacetKBError):
    pass


# ingest
class MissingColumn(FacetKBError):
    pass


class MalformedRow(FacetKBError):
    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class EmptyKey(FacetKBError):
    pass


class ConceptInUse(FacetKBError):
    pass
