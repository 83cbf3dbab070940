"""SKG corpus construction: ingestion, concept extraction, leakage filtering, statistics.

Corpus files are JSONL, one record per line::

    {"id": ..., "source": ..., "context": ..., "sentence": ..., "penman": ..., "concepts": [...]}

``context`` is a whitespace-joined token string and ``penman`` the graph in
the compact PENMAN form produced by :func:`skgkit.penman_codec.encode`.
"""

from __future__ import annotations

import json
import logging
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .graph import (
    SceneKG,
    SKGError,
    is_weakly_connected,
    lemma_set,
    subgraph,
    validate,
    weak_components,
)
from .lexicon import Lexicon, default_lexicon, tokenize
from .penman_codec import decode, encode
from .vg import map_scene_graph, read_vg_jsonl

log = logging.getLogger(__name__)

CONTEXT_LIMIT = 256
SOURCES = ("caption", "story", "visual", "task")
SOURCE_NAMES = {
    "caption": "Caption-AMR",
    "story": "Story-AMR",
    "visual": "VG-SceneGraph",
    "task": "Task-AMR",
}


class CorpusFormatError(SKGError):
    """Fatal problem with the structure of an input file."""


class ArityError(SKGError):
    pass


def truncate_context(tokens: Sequence[str], limit: int = CONTEXT_LIMIT) -> tuple[str, ...]:
    """Keep the most recent ``limit`` tokens."""
    if limit < 1:
        raise ValueError("context limit must be positive")
    return tuple(tokens[-limit:]) if len(tokens) > limit else tuple(tokens)


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    source: str
    context: tuple[str, ...]
    sentence: str
    skg: SceneKG
    concept_set: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "context", tuple(self.context))
        object.__setattr__(self, "concept_set", frozenset(self.concept_set))
        self.skg.freeze()

    @property
    def lemmas(self) -> set[str]:
        return lemma_set(self.skg)


def validate_record(rec: CorpusRecord, context_limit: int = CONTEXT_LIMIT) -> None:
    if not rec.id:
        raise SKGError("record id is empty")
    if rec.source not in SOURCES:
        raise SKGError(f"{rec.id}: unknown source {rec.source!r}")
    validate(rec.skg)
    if len(rec.skg) == 0 or not is_weakly_connected(rec.skg):
        raise SKGError(f"{rec.id}: graph is empty or disconnected")
    if not rec.concept_set <= rec.lemmas:
        raise SKGError(f"{rec.id}: concept set is not contained in the graph nodes")
    if len(rec.context) > context_limit:
        raise SKGError(f"{rec.id}: context longer than {context_limit} tokens")
    if rec.source == "visual" and rec.sentence:
        raise SKGError(f"{rec.id}: visual records carry no sentence")
    if rec.source == "caption" and rec.context:
        raise SKGError(f"{rec.id}: caption records carry no context")


# --------------------------------------------------------------------------
# serialization


def record_to_dict(rec: CorpusRecord) -> dict:
    return {
        "id": rec.id,
        "source": rec.source,
        "context": " ".join(rec.context),
        "sentence": rec.sentence,
        "penman": encode(rec.skg),
        "concepts": sorted(rec.concept_set),
    }


def record_from_dict(obj: dict) -> CorpusRecord:
    try:
        return CorpusRecord(
            id=str(obj["id"]),
            source=obj["source"],
            context=tuple(obj.get("context", "").split()),
            sentence=obj.get("sentence", ""),
            skg=decode(obj["penman"], strict=True),
            concept_set=frozenset(obj.get("concepts", ())),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorpusFormatError(f"malformed corpus record: {exc}") from None


def dumps_record(rec: CorpusRecord) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False)


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")
            n += 1
    return n


def iter_corpus(path: str | Path) -> Iterator[CorpusRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from None
            yield record_from_dict(obj)


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    return list(iter_corpus(path))


# --------------------------------------------------------------------------
# concept extraction


def extract_concept_set(sentence: str, lexicon: Lexicon | None = None) -> set[str]:
    """Lemmas of the nouns and verbs in ``sentence``."""
    lexicon = lexicon or default_lexicon()
    return {tag[2] for tag in lexicon.tag(tokenize(sentence)) if tag is not None}


# --------------------------------------------------------------------------
# AMR ingestion


@dataclass
class IngestResult:
    records: list[CorpusRecord] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)  # (record id, message)


_HAS_LETTER = re.compile(r"[a-z]")


def prune_constants(graph: SceneKG) -> SceneKG:
    """Drop nodes whose label has no letter (numeric concepts)."""
    keep = [i for i, lemma in enumerate(graph.nodes) if _HAS_LETTER.search(lemma)]
    if len(keep) == len(graph):
        return graph
    return subgraph(graph, keep)


def _parse_amr_text(text: str, path: str) -> list[dict]:
    """Blocks separated by blank lines; ``# ::key value`` metadata lines."""
    entries = []
    for block in re.split(r"\n\s*\n", text):
        meta, graph_lines = {}, []
        for line in block.splitlines():
            stripped = line.strip()
            if stripped.startswith("#"):
                m = re.match(r"#\s*::(\S+)\s?(.*)", stripped)
                if m:
                    meta[m.group(1)] = m.group(2).strip()
            elif stripped:
                graph_lines.append(stripped)
        if not graph_lines:
            continue
        if "snt" not in meta:
            raise CorpusFormatError(f"{path}: AMR block without '# ::snt' metadata")
        entries.append({
            "id": meta.get("id"),
            "sentence": meta["snt"],
            "context": meta.get("context", ""),
            "penman": " ".join(graph_lines),
        })
    return entries


def _parse_amr_jsonl(text: str, path: str) -> list[dict]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            entries.append({
                "id": obj.get("id"),
                "sentence": obj["sentence"],
                "context": obj.get("context", ""),
                "penman": obj["penman"],
            })
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            raise CorpusFormatError(f"{path}:{lineno}: malformed AMR record ({exc})") from None
    return entries


def read_amr_entries(path: str | Path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        entries = _parse_amr_jsonl(text, str(path))
    else:
        entries = _parse_amr_text(text, str(path))
    for k, entry in enumerate(entries, 1):
        if not entry["id"]:
            entry["id"] = f"{Path(path).stem}-{k}"
        if not isinstance(entry["sentence"], str) or not isinstance(entry["penman"], str):
            raise CorpusFormatError(f"{path}: record {entry['id']} has non-text fields")
    return entries


def _context_tokens(context) -> list[str]:
    if isinstance(context, str):
        return context.split()
    return [str(t) for t in context]


def silver_graph(penman: str) -> SceneKG:
    graph = prune_constants(decode(penman, strict=True))
    if len(graph) == 0 or not is_weakly_connected(graph):
        raise SKGError("graph is empty or disconnected after removing constants")
    return graph


def _ingest_one(args: tuple[dict, str, Lexicon, int]) -> CorpusRecord | tuple[str, str]:
    entry, source, lexicon, context_limit = args
    try:
        graph = silver_graph(entry["penman"])
        context = () if source == "caption" else truncate_context(
            _context_tokens(entry["context"]), context_limit)
        concepts = extract_concept_set(entry["sentence"], lexicon) & lemma_set(graph)
        rec = CorpusRecord(entry["id"], source, context, entry["sentence"], graph, frozenset(concepts))
        validate_record(rec, context_limit)
        return rec
    except SKGError as exc:
        return entry["id"], str(exc)


def _collect(outcomes, result: IngestResult) -> IngestResult:
    for out in outcomes:
        if isinstance(out, CorpusRecord):
            result.records.append(out)
        else:
            log.warning("skipping record %s: %s", *out)
            result.errors.append(out)
    return result


def ingest_amr(
    path: str | Path,
    source: str = "caption",
    lexicon: Lexicon | None = None,
    context_limit: int = CONTEXT_LIMIT,
    parallelism: int = 1,
) -> IngestResult:
    """Turn a pre-parsed AMR file (JSONL or ``# ::snt`` blocks) into corpus records.

    Records that fail to decode are reported in ``errors`` and skipped.
    """
    if source not in ("caption", "story"):
        raise ValueError(f"AMR sources are 'caption' or 'story', not {source!r}")
    lexicon = lexicon or default_lexicon()
    entries = read_amr_entries(path)
    jobs = [(e, source, lexicon, context_limit) for e in entries]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(parallelism) as pool:
            outcomes = list(pool.map(_ingest_one, jobs, chunksize=64))
    else:
        outcomes = [_ingest_one(j) for j in jobs]
    return _collect(outcomes, IngestResult())


def map_vg_records(lines: Iterable[str], lexicon: Lexicon | None = None) -> IngestResult:
    """Visual records, one per weakly connected component of each image graph.

    Component ``k`` of image ``ID`` gets record id ``visual-ID`` (single
    component) or ``visual-ID#k``.
    """
    result = IngestResult()
    for image_id, triples in read_vg_jsonl(lines, lexicon):
        try:
            graph = map_scene_graph(triples, lexicon)
        except SKGError as exc:
            log.warning("skipping image %s: %s", image_id, exc)
            result.errors.append((image_id, str(exc)))
            continue
        comps = [c for c in weak_components(graph) if len(c) > 1]
        for k, comp in enumerate(comps):
            part = subgraph(graph, comp)
            rid = f"visual-{image_id}" if len(comps) == 1 else f"visual-{image_id}#{k}"
            rec = CorpusRecord(rid, "visual", (), "", part, frozenset(part.nodes))
            result.records.append(rec)
    return result


# --------------------------------------------------------------------------
# silver SKGs for task data


@dataclass(frozen=True)
class TaskItem:
    id: str
    context: tuple[str, ...]
    concept_sets: tuple[frozenset[str], ...]
    sentences: tuple[str, ...]
    penman_graphs: tuple[str, ...]


def read_task_file(path: str | Path) -> list[TaskItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append(TaskItem(
                    id=str(obj["id"]),
                    context=tuple(_context_tokens(obj.get("context", ""))),
                    concept_sets=tuple(frozenset(c) for c in obj["concept_sets"]),
                    sentences=tuple(obj.get("sentences", ())),
                    penman_graphs=tuple(obj.get("penman_graphs", ())),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: malformed task record ({exc})") from None
    return items


def make_silver_skgs(
    items: Iterable[TaskItem], context_limit: int = CONTEXT_LIMIT
) -> IngestResult:
    """One ``task`` record per target sentence, with gold prefix sentences as context."""
    result = IngestResult()
    for item in items:
        if len(item.sentences) != len(item.penman_graphs):
            msg = f"{len(item.sentences)} sentences but {len(item.penman_graphs)} graphs"
            log.warning("skipping task item %s: %s", item.id, msg)
            result.errors.append((item.id, str(ArityError(msg))))
            continue
        context = list(item.context)
        for i, (sentence, penman) in enumerate(zip(item.sentences, item.penman_graphs), 1):
            rid = f"{item.id}-{i}"
            try:
                graph = silver_graph(penman)
                given = item.concept_sets[i - 1] if i - 1 < len(item.concept_sets) else frozenset()
                rec = CorpusRecord(rid, "task", truncate_context(context, context_limit),
                                   sentence, graph, given & lemma_set(graph))
                validate_record(rec, context_limit)
                result.records.append(rec)
            except SKGError as exc:
                log.warning("skipping task record %s: %s", rid, exc)
                result.errors.append((rid, str(exc)))
            context.extend(sentence.split())
    return result


# --------------------------------------------------------------------------
# leakage filter


def filter_overlap(
    corpus: Iterable[CorpusRecord], forbidden: Iterable[Iterable[str]]
) -> tuple[list[CorpusRecord], int]:
    """Drop records whose node lemmas cover any forbidden concept set.

    Returns ``(retained, removed_count)``.
    """
    sets = [frozenset(s) for s in forbidden]
    sets = [s for s in sets if s]
    by_lemma: dict[str, list[int]] = defaultdict(list)
    for k, s in enumerate(sets):
        for lemma in s:
            by_lemma[lemma].append(k)
    retained, removed = [], 0
    for rec in corpus:
        hits: dict[int, int] = defaultdict(int)
        covered = False
        for lemma in rec.lemmas:
            for k in by_lemma.get(lemma, ()):
                hits[k] += 1
                if hits[k] == len(sets[k]):
                    covered = True
                    break
            if covered:
                break
        if covered:
            removed += 1
        else:
            retained.append(rec)
    return retained, removed


# --------------------------------------------------------------------------
# statistics


@dataclass
class CorpusStats:
    counts: dict[str, int] = field(default_factory=dict)
    concepts: dict[str, set[str]] = field(default_factory=dict)

    def add(self, rec: CorpusRecord) -> None:
        self.counts[rec.source] = self.counts.get(rec.source, 0) + 1
        self.concepts.setdefault(rec.source, set()).update(rec.lemmas)

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        out = CorpusStats(dict(self.counts), {k: set(v) for k, v in self.concepts.items()})
        for src, n in other.counts.items():
            out.counts[src] = out.counts.get(src, 0) + n
            out.concepts.setdefault(src, set()).update(other.concepts.get(src, ()))
        return out

    @property
    def total_skgs(self) -> int:
        return sum(self.counts.values())

    @property
    def total_concepts(self) -> int:
        return len(set().union(*self.concepts.values())) if self.concepts else 0

    def rows(self) -> list[tuple[str, int, int]]:
        rows = [(SOURCE_NAMES[s], self.counts[s], len(self.concepts[s]))
                for s in SOURCES if s in self.counts]
        rows.append(("All", self.total_skgs, self.total_concepts))
        return rows

    def as_dict(self) -> dict:
        per = {s: {"skgs": self.counts[s], "concepts": len(self.concepts[s])}
               for s in SOURCES if s in self.counts}
        return {"sources": per, "total": {"skgs": self.total_skgs, "concepts": self.total_concepts}}

    def table(self) -> str:
        rows = [("Knowledge source", "# SKGs", "# Concepts")]
        rows += [(name, f"{n:,}", f"{c:,}") for name, n, c in self.rows()]
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        w2 = max(len(r[2]) for r in rows)
        lines = [f"{a:<{w0}}  {b:>{w1}}  {c:>{w2}}" for a, b, c in rows]
        rule = "-" * len(lines[0])
        return "\n".join([lines[0], rule, *lines[1:-1], rule, lines[-1]])


def corpus_stats(corpus: Iterable[CorpusRecord]) -> CorpusStats:
    stats = CorpusStats()
    for rec in corpus:
        stats.add(rec)
    return stats
