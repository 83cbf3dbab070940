"""Imagination backends: corpus retrieval over a concept inverted index.

:class:`RetrievalImaginer` picks the stored SKG whose record maximizes,
in lexicographic order,

1. the number of requested concepts among its node lemmas,
2. the overlap between the request context and the record's context and
   sentence tokens,
3. a smaller node count,
4. a smaller record id,

and falls back to a star graph over the requested concepts when no record
covers any of them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import CONTEXT_LIMIT, CorpusRecord, record_from_dict, record_to_dict
from .graph import SceneKG, SKGError, normalize_concept
from .lexicon import Lexicon, default_lexicon, tokenize


@dataclass(frozen=True)
class ImaginationRequest:
    context: tuple[str, ...]
    concepts: tuple[str, ...]

    def __post_init__(self) -> None:
        concepts = tuple(dict.fromkeys(normalize_concept(c) for c in self.concepts))
        if not concepts:
            raise SKGError("an imagination request needs at least one concept")
        if len(self.context) > CONTEXT_LIMIT:
            raise SKGError(f"context longer than {CONTEXT_LIMIT} tokens")
        object.__setattr__(self, "context", tuple(self.context))
        object.__setattr__(self, "concepts", concepts)


@dataclass(frozen=True)
class ImaginationResult:
    graph: SceneKG
    fallback: bool = False
    record_id: str | None = None
    warnings: tuple[str, ...] = ()


class Imaginer(Protocol):
    def imagine(self, request: ImaginationRequest) -> ImaginationResult: ...


def record_tokens(rec: CorpusRecord) -> frozenset[str]:
    return frozenset(tokenize(" ".join(rec.context))) | frozenset(tokenize(rec.sentence))


class ConceptIndex:
    """Inverted index from node lemma to the sorted ids of records containing it."""

    def __init__(self, records: Iterable[CorpusRecord]) -> None:
        store: dict[str, CorpusRecord] = {}
        postings: dict[str, list[str]] = {}
        for rec in records:
            if rec.id in store:
                raise SKGError(f"duplicate record id {rec.id!r}")
            store[rec.id] = rec
            for lemma in rec.lemmas:
                postings.setdefault(lemma, []).append(rec.id)
        self.store: Mapping[str, CorpusRecord] = MappingProxyType(store)
        self.postings: Mapping[str, tuple[str, ...]] = MappingProxyType(
            {k: tuple(sorted(v)) for k, v in postings.items()}
        )
        self._tokens = {rid: record_tokens(rec) for rid, rec in store.items()}

    def __len__(self) -> int:
        return len(self.store)

    def tokens(self, record_id: str) -> frozenset[str]:
        return self._tokens[record_id]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rid in sorted(self.store):
                fh.write(json.dumps(record_to_dict(self.store[rid]), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ConceptIndex":
        with open(path, encoding="utf-8") as fh:
            return cls(record_from_dict(json.loads(line)) for line in fh if line.strip())


def build_index(corpus: Iterable[CorpusRecord]) -> ConceptIndex:
    return ConceptIndex(corpus)


def star_graph(concepts: Sequence[str], lexicon: Lexicon | None = None) -> SceneKG:
    """One node per concept, all attached to a hub.

    The hub is the first concept that is a known verb (edges ``ARG1``),
    otherwise the first concept (edges ``other``).
    """
    lexicon = lexicon or default_lexicon()
    verbs = [i for i, c in enumerate(concepts) if c in lexicon.verbs]
    hub, rel = (verbs[0], "ARG1") if verbs else (0, "other")
    g = SceneKG()
    for c in concepts:
        g.add_node(c)
    for i in range(len(concepts)):
        if i != hub:
            g.add_edge(hub, rel, i)
    return g.freeze()


class RetrievalImaginer:
    def __init__(self, index: ConceptIndex, lexicon: Lexicon | None = None) -> None:
        if len(index) == 0:
            raise SKGError("retrieval needs a non-empty index")
        self.index = index
        self.lexicon = lexicon or default_lexicon()

    def best_record(self, request: ImaginationRequest) -> tuple[str | None, int]:
        """Winning record id and its concept coverage (``None, 0`` when nothing matches)."""
        coverage: dict[str, int] = {}
        for concept in request.concepts:
            for rid in self.index.postings.get(concept, ()):
                coverage[rid] = coverage.get(rid, 0) + 1
        if not coverage:
            return None, 0
        top = max(coverage.values())
        ctx = frozenset(tokenize(" ".join(request.context)))

        def key(rid: str):
            overlap = len(ctx & self.index.tokens(rid)) if ctx else 0
            return (-overlap, len(self.index.store[rid].skg), rid)

        best = min((rid for rid, c in coverage.items() if c == top), key=key)
        return best, top

    def imagine(self, request: ImaginationRequest) -> ImaginationResult:
        rid, _ = self.best_record(request)
        if rid is None:
            return ImaginationResult(star_graph(request.concepts, self.lexicon), fallback=True)
        return ImaginationResult(self.index.store[rid].skg, record_id=rid)


def retrieval_imagine(index: ConceptIndex, request: ImaginationRequest) -> SceneKG:
    return RetrievalImaginer(index).imagine(request).graph
