"""Training instances for the imagination and verbalization models.

Both kinds share one flat text layout, segments joined by ``<sep>``::

    imagination:    <context | none> <sep> <shuffled concepts>            -> <penman>
    verbalization:  <context | none> <sep> <sorted concepts> <sep> <penman> -> <sentence>
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import CorpusRecord
from .graph import EmptyGraph, SceneKG
from .penman_codec import encode

SEP = "<sep>"
NO_CONTEXT = "none"
DEFAULT_DROPOUT = 0.15


@dataclass(frozen=True)
class TrainingInstance:
    input: str
    target: str
    kind: str  # "imagination" | "verbalization"
    skg_origin: str  # "silver" | "generated" | "none"


def derive_seed(global_seed: int, record_id: str) -> int:
    """Per-record seed that does not depend on processing order."""
    digest = hashlib.sha256(f"{global_seed}\x00{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def format_input(
    context: Sequence[str],
    concepts: Sequence[str],
    penman: str | None = None,
    *,
    include_context: bool = True,
    include_concepts: bool = True,
) -> str:
    parts = []
    if include_context:
        parts.append(" ".join(context) if context else NO_CONTEXT)
    if include_concepts:
        parts.append(" ".join(concepts))
    if penman is not None:
        parts.append(penman)
    return f" {SEP} ".join(parts)


def sample_concepts(nodes: Sequence[str], rng: random.Random, dropout_rate: float) -> list[str]:
    """Drop each node lemma with probability ``dropout_rate`` and shuffle the rest.

    At least one lemma always survives.
    """
    if not nodes:
        raise EmptyGraph("no concepts to sample from")
    kept = [lemma for lemma in nodes if rng.random() >= dropout_rate]
    if not kept:
        kept = [rng.choice(list(nodes))]
    rng.shuffle(kept)
    return kept


def build_imagination_instance(
    record: CorpusRecord, seed: int, dropout_rate: float = DEFAULT_DROPOUT
) -> TrainingInstance:
    if not 0 <= dropout_rate < 1:
        raise ValueError("dropout_rate must lie in [0, 1)")
    if len(record.skg) == 0:
        raise EmptyGraph(f"{record.id}: empty graph")
    rng = random.Random(seed)
    concepts = sample_concepts(record.skg.nodes, rng, dropout_rate)
    return TrainingInstance(
        input=format_input(record.context, concepts),
        target=encode(record.skg),
        kind="imagination",
        skg_origin="none",
    )


def build_verbalization_instances(
    record: CorpusRecord, imagined: SceneKG | None = None
) -> list[TrainingInstance]:
    if not record.sentence:
        raise ValueError(f"{record.id}: verbalization needs a target sentence")
    concepts = sorted(record.concept_set)
    graphs = [("silver", record.skg)]
    if imagined is not None:
        graphs.append(("generated", imagined))
    return [
        TrainingInstance(
            input=format_input(record.context, concepts, encode(g)),
            target=record.sentence,
            kind="verbalization",
            skg_origin=origin,
        )
        for origin, g in graphs
    ]


def build_imagination_epoch(
    records: Iterable[CorpusRecord],
    global_seed: int,
    dropout_rate: float = DEFAULT_DROPOUT,
    epoch: int = 0,
) -> list[TrainingInstance]:
    """One freshly shuffled and dropped-out instance per record."""
    return [
        build_imagination_instance(rec, derive_seed(global_seed, f"{rec.id}@{epoch}"), dropout_rate)
        for rec in records
    ]


def export_jsonl(instances: Iterable[TrainingInstance], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(asdict(inst), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[TrainingInstance]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingInstance(**json.loads(line)) for line in fh if line.strip()]
