"""``facetkb`` command line.

Exit codes: 0 success, 1 lint found errors, 2 parse/load failure,
3 refactor failure, 4 binding or ingest failure, 5 query evaluation
failure, 6 snapshot locked by another process.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import errors
from .ingest import apply_rows, parse_mapping, prepare_rows
from .outline import dump_outline
from .project import (
    BuildError,
    LockBusy,
    StatsSummary,
    build,
    load_manifest,
    load_snapshot,
    load_snapshot_questions,
    snapshot_lock,
    write_snapshot,
)
from .query import evaluate, parse_query, render_term
from .rdf import dump_ntriples
from .validate import validate

EXIT_LINT = 1
EXIT_PARSE = 2
EXIT_INGEST = 4
EXIT_EVAL = 5
EXIT_LOCKED = 6


def _err(message: str) -> None:
    print(f"facetkb: {message}", file=sys.stderr)


def _load(path: str):
    try:
        return load_snapshot(path)
    except (OSError, errors.FacetKBError) as exc:
        _err(f"cannot load snapshot {path}: {exc}")
        return None


def cmd_build(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
        result = build(manifest)
    except BuildError as exc:
        _err(str(exc))
        return exc.exit_code
    out = Path(args.output) if args.output else manifest.output or Path("snapshot")
    with snapshot_lock(out):
        write_snapshot(result.kb, out, result.competency_text)
    print(f"wrote snapshot {out}")
    return 0


def cmd_query(args) -> int:
    kb = _load(args.snapshot)
    if kb is None:
        return EXIT_PARSE
    if args.file:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            _err(f"cannot read {args.file}: {exc.strerror}")
            return EXIT_PARSE
    else:
        text = args.query
    try:
        query = parse_query(text)
    except errors.ParseError as exc:
        _err(f"query syntax error at {exc}")
        return EXIT_PARSE
    except errors.UndeclaredPrefix as exc:
        _err(f"query error at {getattr(exc, 'line', 0)}:{getattr(exc, 'col', 0)}: {Exception.__str__(exc)}")
        return EXIT_PARSE
    kb.freeze()
    try:
        rows = evaluate(kb, query)
    except errors.FacetKBError as exc:
        _err(f"evaluation failed: {exc}")
        return EXIT_EVAL
    print("\t".join(query.projected))
    for row in rows:
        print("\t".join(render_term(kb, row[v]) for v in query.projected))
    return 0


def cmd_lint(args) -> int:
    if not Path(args.snapshot).exists():
        _err(f"{args.snapshot} does not exist")
        return EXIT_PARSE
    kb = _load(args.snapshot)
    if kb is None:
        return EXIT_PARSE
    try:
        questions = load_snapshot_questions(args.snapshot)
    except (errors.FacetKBError, ValueError, KeyError) as exc:
        _err(f"bad competency questions: {exc}")
        return EXIT_PARSE
    report = validate(kb.freeze(), questions)
    sys.stdout.write(report.to_jsonl() if args.json else report.to_text())
    return 0 if report.passed else EXIT_LINT


def cmd_ingest(args) -> int:
    if not Path(args.snapshot).is_dir():
        _err(f"{args.snapshot} is not a snapshot directory")
        return EXIT_PARSE
    try:
        with snapshot_lock(args.snapshot):
            kb = _load(args.snapshot)
            if kb is None:
                return EXIT_PARSE
            try:
                spec = parse_mapping(Path(args.mapping).read_text(encoding="utf-8"))
                data = Path(args.data).read_text(encoding="utf-8")
            except OSError as exc:
                _err(f"cannot read input: {exc}")
                return EXIT_PARSE
            except errors.ParseError as exc:
                _err(f"{args.mapping}: {exc}")
                return EXIT_PARSE
            try:
                report = apply_rows(kb, spec, prepare_rows(spec, data, kb.namespace))
            except errors.FacetKBError as exc:
                _err(f"{type(exc).__name__}: {exc}")
                return EXIT_INGEST
            if report.entities_created or report.entities_updated:
                write_snapshot(kb, args.snapshot)
    except LockBusy as exc:
        _err(str(exc))
        return EXIT_LOCKED
    print(report.summary())
    for index, reason in report.skipped_rows:
        if reason != "unchanged":
            print(f"skipped row {index}: {reason}")
    return 0


def cmd_export(args) -> int:
    kb = _load(args.snapshot)
    if kb is None:
        return EXIT_PARSE
    sys.stdout.write(dump_ntriples(kb.abox) if args.format == "ntriples" else dump_outline(kb))
    return 0


def cmd_stats(args) -> int:
    kb = _load(args.snapshot)
    if kb is None:
        return EXIT_PARSE
    print("\n".join(StatsSummary.of(kb).lines()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facetkb", description="Faceted ontology knowledge base tool.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a snapshot from a project manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", help="snapshot directory (default: manifest 'output', else ./snapshot)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="run a conjunctive query, print TSV")
    p.add_argument("snapshot")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("-f", "--file", help="query file")
    src.add_argument("-q", "--query", help="inline query text")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("lint", help="validate a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--json", action="store_true", help="JSON-lines output")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("ingest", help="ingest a delimited file into a snapshot")
    p.add_argument("snapshot")
    p.add_argument("mapping")
    p.add_argument("data")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export", help="print the ABox or schema")
    p.add_argument("snapshot")
    p.add_argument("--format", choices=("ntriples", "outline"), default="ntriples")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("stats", help="print size counters")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LockBusy as exc:
        _err(str(exc))
        return EXIT_LOCKED


if __name__ == "__main__":
    sys.exit(main())
