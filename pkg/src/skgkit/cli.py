"""Command-line interface: ``skg <subcommand> ...``.

Settings resolve as command-line flag, then environment variable
(``SKGKIT_SEED``, ``SKGKIT_DROPOUT_RATE``, ...), then the JSON file given by
``--config``, then the built-in default.  Output files are written to a
temporary file and renamed into place, so a failed run never leaves a
truncated output behind.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import tempfile
import textwrap
from dataclasses import asdict
from pathlib import Path
from typing import Iterable

from . import corpus as corpus_mod
from .backend import BackendClient, BackendFailure
from .corpus import (
    CONTEXT_LIMIT,
    corpus_stats,
    dumps_record,
    filter_overlap,
    ingest_amr,
    iter_corpus,
    make_silver_skgs,
    map_vg_records,
    read_corpus,
    read_task_file,
)
from .evaluation import evaluate_run, report_json
from .graph import SKGError
from .imagination import ConceptIndex, ImaginationRequest, RetrievalImaginer
from .instances import DEFAULT_DROPOUT, build_imagination_epoch, build_verbalization_instances
from .penman_codec import decode, encode
from .pipeline import PipelineError, read_jobs, read_results, result_line, run_batch
from .verbalization import TemplateVerbalizer, VerbalizationRequest, assemble_input

log = logging.getLogger("skgkit")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_BACKEND = 4
EXIT_PARTIAL = 5

EXIT_CODES = f"""exit codes:
  {EXIT_OK}  success
  {EXIT_DATA}  invalid or malformed input data
  {EXIT_USAGE}  bad command line (unknown subcommand, invalid flag value)
  {EXIT_FILE}  file could not be read or written
  {EXIT_BACKEND}  external backend failure (connection, timeout, bad reply)
  {EXIT_PARTIAL}  run-pipeline finished but some jobs failed
"""

ENV_PREFIX = "SKGKIT_"
SETTINGS = {
    # name: (type, default)
    "seed": (int, 0),
    "dropout_rate": (float, DEFAULT_DROPOUT),
    "context_limit": (int, CONTEXT_LIMIT),
    "parallelism": (int, 1),
    "imagine_endpoint": (str, None),
    "verbalize_endpoint": (str, None),
    "timeout": (float, 30.0),
    "retries": (int, 2),
    "mode": (str, "iterative"),
}


EPILOG = "settings:\n" + textwrap.fill(
    f"Each of {', '.join(sorted(SETTINGS))} comes from its flag, else the environment "
    f"variable {ENV_PREFIX}<NAME> (e.g. {ENV_PREFIX}SEED), else the --config JSON file, else the default.",
    width=76, initial_indent="  ", subsequent_indent="  ",
) + "\n\n" + EXIT_CODES


class UsageError(Exception):
    pass


def resolve(args: argparse.Namespace, name: str):
    """Flag > environment > config file > default."""
    kind, default = SETTINGS[name]
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get(ENV_PREFIX + name.upper())
    try:
        if env is not None:
            return kind(env)
        if name in args.config_values:
            return kind(args.config_values[name])
    except ValueError:
        raise UsageError(f"invalid value for setting {name!r}") from None
    return default


@contextlib.contextmanager
def atomic_output(path: str | Path):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_lines(path: str | Path, lines: Iterable[str]) -> int:
    n = 0
    with atomic_output(path) as fh:
        for line in lines:
            fh.write(line + "\n")
            n += 1
    return n


def _read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SKGError(f"{path}:{lineno}: {exc}") from None
    return out


def _client(args, endpoint: str) -> BackendClient:
    try:
        return BackendClient(endpoint, resolve(args, "timeout"), resolve(args, "retries"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _make_imaginer(args):
    endpoint = resolve(args, "imagine_endpoint")
    if endpoint:
        return _client(args, endpoint)
    if not getattr(args, "index", None):
        raise UsageError("an imagination backend is needed: pass --index or --imagine-endpoint")
    return RetrievalImaginer(ConceptIndex.load(args.index))


def _make_verbalizer(args):
    endpoint = resolve(args, "verbalize_endpoint")
    if endpoint:
        return _client(args, endpoint)
    return TemplateVerbalizer()


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest_amr(args) -> int:
    result = ingest_amr(args.input, args.source, context_limit=resolve(args, "context_limit"),
                        parallelism=resolve(args, "parallelism"))
    n = write_lines(args.output, (dumps_record(r) for r in result.records))
    print(f"wrote {n} records, skipped {len(result.errors)}", file=sys.stderr)
    return EXIT_OK


def cmd_map_vg(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        result = map_vg_records(fh)
    n = write_lines(args.output, (dumps_record(r) for r in result.records))
    print(f"wrote {n} records, skipped {len(result.errors)}", file=sys.stderr)
    return EXIT_OK


def cmd_make_silver(args) -> int:
    result = make_silver_skgs(read_task_file(args.input), resolve(args, "context_limit"))
    n = write_lines(args.output, (dumps_record(r) for r in result.records))
    print(f"wrote {n} records, skipped {len(result.errors)}", file=sys.stderr)
    return EXIT_OK


def read_forbidden(path) -> list[frozenset[str]]:
    """Concept sets from a task file, a JSONL of lists, or lines of space-separated lemmas."""
    sets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line[0] in "[{":
                obj = json.loads(line)
                if isinstance(obj, dict):
                    sets.extend(frozenset(cs) for cs in obj["concept_sets"])
                else:
                    sets.append(frozenset(obj))
            else:
                sets.append(frozenset(line.replace(",", " ").split()))
    return sets


def cmd_filter_overlap(args) -> int:
    forbidden = []
    for path in args.forbidden:
        forbidden += read_forbidden(path)
    retained, removed = filter_overlap(iter_corpus(args.input), forbidden)
    write_lines(args.output, (dumps_record(r) for r in retained))
    print(f"retained {len(retained)}, removed {removed}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = corpus_mod.CorpusStats()
    for path in args.input:
        stats = stats.merge(corpus_stats(iter_corpus(path)))
    print(json.dumps(stats.as_dict(), indent=2) if args.json else stats.table())
    return EXIT_OK


def cmd_build_index(args) -> int:
    index = ConceptIndex(record for path in args.input for record in iter_corpus(path))
    lines = (dumps_record(index.store[rid]) for rid in sorted(index.store))
    write_lines(args.output, lines)
    print(f"indexed {len(index)} records, {len(index.postings)} concepts", file=sys.stderr)
    return EXIT_OK


def cmd_make_instances(args) -> int:
    records = read_corpus(args.input)
    seed = resolve(args, "seed")
    rate = resolve(args, "dropout_rate")
    if not 0 <= rate < 1:
        raise UsageError("--dropout-rate must lie in [0, 1)")
    out = []
    if args.kind in ("imagination", "both"):
        for epoch in range(args.epochs):
            out += build_imagination_epoch(records, seed, rate, epoch)
    if args.kind in ("verbalization", "both"):
        imaginer = RetrievalImaginer(ConceptIndex.load(args.imagine_index)) if args.imagine_index else None
        for rec in records:
            if not rec.sentence:
                continue
            imagined = None
            if imaginer is not None and rec.concept_set:
                req = ImaginationRequest(rec.context, tuple(sorted(rec.concept_set)))
                imagined = imaginer.imagine(req).graph
            out += build_verbalization_instances(rec, imagined)
    n = write_lines(args.output, (json.dumps(asdict(i), ensure_ascii=False) for i in out))
    print(f"wrote {n} instances", file=sys.stderr)
    return EXIT_OK


def _requests_from(args) -> list[dict]:
    if args.input:
        return _read_jsonl(args.input)
    if not args.concepts:
        raise UsageError("pass an input JSONL file or --concepts")
    return [{"id": "0", "context": args.context or "", "concepts": args.concepts.replace(",", " ").split()}]


def cmd_imagine(args) -> int:
    imaginer = _make_imaginer(args)
    lines = []
    try:
        for k, req in enumerate(_requests_from(args)):
            request = ImaginationRequest(tuple(str(req.get("context", "")).split()), tuple(req["concepts"]))
            result = imaginer.imagine(request)
            lines.append(json.dumps({"id": str(req.get("id", k)), "penman": encode(result.graph),
                                     "fallback": result.fallback}, ensure_ascii=False))
    finally:
        if isinstance(imaginer, BackendClient):
            imaginer.close()
    _emit(args, lines)
    return EXIT_OK


def cmd_verbalize(args) -> int:
    verbalizer = None if args.assemble else _make_verbalizer(args)
    lines = []
    try:
        for k, req in enumerate(_requests_from_verbalize(args)):
            request = VerbalizationRequest(tuple(str(req.get("context", "")).split()),
                                           tuple(req.get("concepts", ())), decode(req["penman"]))
            rid = str(req.get("id", k))
            if args.assemble:
                lines.append(json.dumps({"id": rid, "input": assemble_input(request)}, ensure_ascii=False))
            else:
                lines.append(json.dumps({"id": rid, "text": verbalizer.verbalize(request)}, ensure_ascii=False))
    finally:
        if isinstance(verbalizer, BackendClient):
            verbalizer.close()
    _emit(args, lines)
    return EXIT_OK


def _requests_from_verbalize(args) -> list[dict]:
    if args.input:
        return _read_jsonl(args.input)
    if not args.penman:
        raise UsageError("pass an input JSONL file or --penman")
    concepts = (args.concepts or "").replace(",", " ").split()
    return [{"id": "0", "context": args.context or "", "concepts": concepts, "penman": args.penman}]


def _emit(args, lines: list[str]) -> None:
    if args.output:
        write_lines(args.output, lines)
    else:
        for line in lines:
            print(line)


def cmd_run_pipeline(args) -> int:
    jobs = read_jobs(args.input, resolve(args, "mode"))
    imaginer = _make_imaginer(args)
    verbalizer = _make_verbalizer(args)
    try:
        outcomes = run_batch(jobs, imaginer, verbalizer, resolve(args, "parallelism"),
                             resolve(args, "context_limit"))
    finally:
        for backend in (imaginer, verbalizer):
            if isinstance(backend, BackendClient):
                backend.close()
    write_lines(args.output, (result_line(o, args.timings) for o in outcomes))
    failed = [o for o in outcomes if isinstance(o, PipelineError)]
    for exc in failed:
        print(f"run-pipeline: {exc}", file=sys.stderr)
    print(f"completed {len(outcomes) - len(failed)} of {len(outcomes)} jobs", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_evaluate(args) -> int:
    report = evaluate_run(read_results(args.results), read_task_file(args.references))
    if args.output:
        with atomic_output(args.output) as fh:
            fh.write(report_json(report) + "\n")
    if args.csv:
        with atomic_output(args.csv) as fh:
            fh.write(report.csv())
    print(report.table())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of default settings")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_backend_flags(p: argparse.ArgumentParser, imagine: bool = True, verbalize: bool = True) -> None:
    if imagine:
        p.add_argument("--index", help="corpus index for retrieval imagination")
        p.add_argument("--imagine-endpoint", help="external imagination backend (tcp://, unix:, stdio:)")
    if verbalize:
        p.add_argument("--verbalize-endpoint",
                       help="external verbalization backend; the template realizer is used otherwise")
    p.add_argument("--timeout", type=float, help="backend timeout in seconds (default 30)")
    p.add_argument("--retries", type=int, help="retries on transport errors (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skg", description="Scene knowledge graph toolkit.", epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(p)
        return p

    p = add("ingest-amr", "Build corpus records from a pre-parsed AMR file (JSONL or '# ::snt' blocks).")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--source", choices=("caption", "story"), default="caption")
    p.add_argument("--context-limit", type=int, help=f"context tokens kept (default {CONTEXT_LIMIT})")
    p.add_argument("--parallelism", type=int, help="worker processes (default 1)")
    p.set_defaults(func=cmd_ingest_amr)

    p = add("map-vg", "Map visual scene-graph JSONL records to corpus records.")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_map_vg)

    p = add("make-silver", "Build task records from a task file with parsed target sentences.")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--context-limit", type=int)
    p.set_defaults(func=cmd_make_silver)

    p = add("filter-overlap", "Remove records whose nodes cover any forbidden concept set.")
    p.add_argument("input")
    p.add_argument("--forbidden", required=True, action="append",
                   help="task file, JSONL of concept lists, or one space-separated set per line (repeatable)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_filter_overlap)

    p = add("stats", "Count SKGs and distinct concepts per source.")
    p.add_argument("input", nargs="+")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_stats)

    p = add("build-index", "Build a retrieval index from corpus files.")
    p.add_argument("input", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_build_index)

    p = add("make-instances", "Export imagination and/or verbalization training instances.")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--kind", choices=("imagination", "verbalization", "both"), default="both")
    p.add_argument("--seed", type=int, help="global random seed (default 0)")
    p.add_argument("--dropout-rate", type=float, help=f"concept dropout rate (default {DEFAULT_DROPOUT})")
    p.add_argument("--epochs", type=int, default=1, help="imagination instances per record")
    p.add_argument("--imagine-index", help="index used to add generated-SKG verbalization instances")
    p.set_defaults(func=cmd_make_instances)

    p = add("imagine", "Produce SKGs for concept sets.")
    p.add_argument("input", nargs="?", help="JSONL of {id, context, concepts}")
    p.add_argument("--concepts", help="comma- or space-separated concepts (instead of an input file)")
    p.add_argument("--context", help="context text for --concepts")
    p.add_argument("-o", "--output")
    _add_backend_flags(p, verbalize=False)
    p.set_defaults(func=cmd_imagine)

    p = add("verbalize", "Turn SKGs into sentences.")
    p.add_argument("input", nargs="?", help="JSONL of {id, context, concepts, penman}")
    p.add_argument("--penman", help="single graph (instead of an input file)")
    p.add_argument("--concepts")
    p.add_argument("--context")
    p.add_argument("--assemble", action="store_true", help="print the assembled model input instead")
    p.add_argument("-o", "--output")
    _add_backend_flags(p, imagine=False)
    p.set_defaults(func=cmd_verbalize)

    p = add("run-pipeline", "Run iterative imagine-and-verbalize generation over a job file.")
    p.add_argument("input", help="JSONL of {id, context, concept_sets}")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=("iterative", "independent"))
    p.add_argument("--parallelism", type=int, help="concurrent jobs (default 1)")
    p.add_argument("--context-limit", type=int)
    p.add_argument("--timings", action="store_true", help="include backend latencies in the output")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run_pipeline)

    p = add("evaluate", "Score pipeline results against a task file.")
    p.add_argument("results")
    p.add_argument("references")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.add_argument("--csv", help="write per-instance scores here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.config_values = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                args.config_values = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
        if resolve(args, "context_limit") < 1:
            raise UsageError("context limit must be at least 1")
        if resolve(args, "parallelism") < 1:
            raise UsageError("parallelism must be at least 1")
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except BackendFailure as exc:
        print(f"error: backend: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (SKGError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    return EXIT_USAGE  # pragma: no cover - parser.error exits


if __name__ == "__main__":
    sys.exit(main())
