"""facetkb: a faceted ontology engine and small knowledge base.

Build a schema from a facet outline, refactor it, bind it to ISCED 2011
levels, load and ingest instance data, then query and validate it.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import FacetKBError, ParseError
from .ingest import IngestReport, MappingSpec, ingest_delimited, mint_entity_id, parse_mapping
from .isced import IscedMapping, parse_isced
from .kb import AttributeFacet, AttributeValue, Concept, KnowledgeBase, RelationDecl
from .outline import dump_outline, parse_outline
from .project import StatsSummary, build, load_manifest, load_snapshot, save_snapshot
from .query import brute_force_evaluate, evaluate, parse_query, type_instances
from .rdf import IRI, Literal, dump_ntriples, parse_ntriples
from .refactor import apply_script, parse_script
from .validate import Finding, ValidationReport, run_pitfall_scan, validate

__version__ = "0.1.0"


def data_path(name: str = "") -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files(__package__) / "data")) / name


__all__ = [
    "AttributeFacet", "AttributeValue", "Concept", "FacetKBError", "Finding", "IRI",
    "IngestReport", "IscedMapping", "KnowledgeBase", "Literal", "MappingSpec", "ParseError",
    "RelationDecl", "StatsSummary", "ValidationReport", "apply_script", "brute_force_evaluate",
    "build", "data_path", "dump_ntriples", "dump_outline", "evaluate", "ingest_delimited",
    "load_manifest", "load_snapshot", "mint_entity_id", "parse_isced", "parse_mapping",
    "parse_ntriples", "parse_outline", "parse_query", "parse_script", "run_pitfall_scan",
    "save_snapshot", "type_instances", "validate",
]
