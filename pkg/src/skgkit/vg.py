"""Mapping of visual scene-graph triples onto the SKG relation schema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from .graph import EmptyGraph, SceneKG, SKGError, Triple, normalize_concept
from .lexicon import Lexicon, default_lexicon, spatial_predicates

LITERAL_PREDICATES = {
    "be": "domain",
    "displace": "possible",
    "have": "part",
    "of": "part",
    "with": "poss",
}


@dataclass(frozen=True)
class VisualTriple:
    subject: str
    predicate: str
    object: str
    predicate_is_verb: bool = False

    def __post_init__(self) -> None:
        for name in ("subject", "predicate", "object"):
            value = " ".join(str(getattr(self, name)).split())
            if not value:
                raise SKGError(f"visual triple field {name!r} is empty")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "predicate", self.predicate.lower())


def _entity(text: str) -> str:
    # multi-word object names ("red shirt") keep their head word
    return normalize_concept(text.split()[-1])


def _literal_key(predicate: str, lexicon: Lexicon) -> str:
    if predicate in LITERAL_PREDICATES:
        return predicate
    if " " not in predicate:
        lemma = lexicon.exceptions.get(predicate)
        if lemma in LITERAL_PREDICATES:
            return lemma
    return predicate


def map_triple(t: VisualTriple, lexicon: Lexicon | None = None) -> list[Triple]:
    lexicon = lexicon or default_lexicon()
    subj, obj = _entity(t.subject), _entity(t.object)
    if t.predicate_is_verb:
        head = t.predicate.split()[0]
        verb = normalize_concept(lexicon.verb_lemma(head) or head)
        return [(verb, "ARG0", subj), (verb, "ARG1", obj)]
    key = _literal_key(t.predicate, lexicon)
    if key in LITERAL_PREDICATES:
        return [(subj, LITERAL_PREDICATES[key], obj)]
    if t.predicate in spatial_predicates():
        return [(subj, "location", obj)]
    return [(subj, "other", obj)]


def predicate_is_verb(predicate: str, lexicon: Lexicon | None = None) -> bool:
    """Lexicon-based verb flag used when a record does not carry ``is_verb``."""
    lexicon = lexicon or default_lexicon()
    predicate = " ".join(predicate.lower().split())
    if _literal_key(predicate, lexicon) in LITERAL_PREDICATES or predicate in spatial_predicates():
        return False
    words = predicate.split()
    return bool(words) and lexicon.verb_lemma(words[0]) is not None


def map_scene_graph(triples: Iterable[VisualTriple], lexicon: Lexicon | None = None) -> SceneKG:
    """Merge the mapped triples of one image into a graph with one node per lemma.

    Repeated edges collapse; mapped triples whose head and tail share a
    lemma are dropped, since they would be self-loops.
    """
    triples = list(triples)
    if not triples:
        raise EmptyGraph("cannot map an empty scene graph")
    g = SceneKG()
    ids: dict[str, int] = {}
    for t in triples:
        for head, rel, tail in map_triple(t, lexicon):
            if head == tail:
                continue
            for lemma in (head, tail):
                if lemma not in ids:
                    ids[lemma] = g.add_node(lemma)
            if not g.has_edge(ids[head], rel, ids[tail]):
                g.add_edge(ids[head], rel, ids[tail])
    return g


def read_vg_jsonl(lines: Iterable[str], lexicon: Lexicon | None = None) -> Iterator[tuple[str, list[VisualTriple]]]:
    """Yield ``(image_id, triples)`` from image-record JSONL lines."""
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            image_id = str(rec["image_id"])
            triples = []
            for t in rec["triples"]:
                is_verb = t.get("is_verb")
                if is_verb is None:
                    is_verb = predicate_is_verb(t["predicate"], lexicon)
                triples.append(VisualTriple(t["subject"], t["predicate"], t["object"], bool(is_verb)))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise SKGError(f"line {lineno}: malformed image record ({exc})") from None
        yield image_id, triples
