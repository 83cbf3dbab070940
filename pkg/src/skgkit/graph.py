"""Scene knowledge graph data model.

A :class:`SceneKG` holds concept-instance nodes (dense integer ids, each
carrying a lemma) and typed directed edges between them.  Node identity is
per instance, so two ``dog`` nodes may coexist; metrics compare graphs at
the lemma level through :func:`lemma_triples`.
"""

from __future__ import annotations

import re
from functools import lru_cache
from collections import Counter
from typing import Iterable, Iterator

CORE_RELATIONS = (
    "ARG0", "ARG1", "ARG2", "ARG3", "ARG4",
    "location", "time", "part", "poss", "domain", "possible",
    "op1", "op2", "op3", "mod", "purpose", "instrument", "medium", "other",
)
_CORE_BY_FOLDED = {r.lower(): r for r in CORE_RELATIONS}

_SENSE_SUFFIX = re.compile(r"-\d+$")
# characters that would break PENMAN tokenization
_RESERVED = set('()/:"')

Triple = tuple[str, str, str]


class SKGError(ValueError):
    """Base class for graph construction errors."""


class InvalidLabel(SKGError):
    pass


class MissingNode(SKGError):
    pass


class SelfLoop(SKGError):
    pass


class DuplicateEdge(SKGError):
    pass


class EmptyGraph(SKGError):
    pass


class FrozenGraph(SKGError):
    pass


def concept_label(text: str) -> str:
    """Validate a concept lemma, stripping an AMR sense suffix (``throw-01``)."""
    if not isinstance(text, str) or not text:
        raise InvalidLabel("concept label must be a non-empty string")
    return _checked_concept(text)


@lru_cache(maxsize=65536)
def _checked_concept(text: str) -> str:
    if any(ch.isspace() for ch in text):
        raise InvalidLabel(f"concept label {text!r} contains whitespace")
    if text != text.lower():
        raise InvalidLabel(f"concept label {text!r} is not lowercase")
    if _RESERVED.intersection(text):
        raise InvalidLabel(f"concept label {text!r} contains a reserved character")
    stripped = _SENSE_SUFFIX.sub("", text)
    if not stripped:
        raise InvalidLabel(f"concept label {text!r} is empty after sense stripping")
    return stripped


def normalize_concept(text: str) -> str:
    """Lenient variant of :func:`concept_label` that lowercases and trims first."""
    return concept_label(text.strip().lower())


def relation_label(text: str) -> str:
    """Return the canonical spelling of a relation label.

    Core relations are matched case-insensitively (``Location`` and
    ``arg0`` map to ``location`` and ``ARG0``).  Anything else becomes an
    extension label, which must be lowercase without whitespace.
    """
    if not isinstance(text, str) or not text:
        raise InvalidLabel("relation label must be a non-empty string")
    return _checked_relation(text)


@lru_cache(maxsize=4096)
def _checked_relation(text: str) -> str:
    core = _CORE_BY_FOLDED.get(text.lower())
    if core is not None:
        return core
    if any(ch.isspace() for ch in text):
        raise InvalidLabel(f"relation label {text!r} contains whitespace")
    if text != text.lower():
        raise InvalidLabel(f"relation label {text!r} is not lowercase")
    if _RESERVED.intersection(text):
        raise InvalidLabel(f"relation label {text!r} contains a reserved character")
    if text.endswith("-of"):
        # reserved for inverse roles in PENMAN
        raise InvalidLabel(f"relation label {text!r} ends with '-of'")
    return text


def is_core_relation(label: str) -> bool:
    return label in _CORE_BY_FOLDED.values()


class SceneKG:
    """Mutable-until-frozen multi-relational concept graph."""

    __slots__ = ("_nodes", "_edges", "_edge_set", "_frozen")

    def __init__(self) -> None:
        self._nodes: list[str] = []
        self._edges: list[tuple[int, str, int]] = []
        self._edge_set: set[tuple[int, str, int]] = set()
        self._frozen = False

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> "SceneKG":
        """Build a graph with one node per distinct lemma, in first-seen order."""
        g = cls()
        ids: dict[str, int] = {}
        for head, rel, tail in triples:
            for lemma in (head, tail):
                if lemma not in ids:
                    ids[lemma] = g.add_node(lemma)
            edge = (ids[head], relation_label(rel), ids[tail])
            if edge not in g._edge_set:
                g.add_edge(*edge)
        return g

    @property
    def nodes(self) -> list[str]:
        return list(self._nodes)

    @property
    def edges(self) -> list[tuple[int, str, int]]:
        return list(self._edges)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self) -> int:
        return len(self._nodes)

    def label(self, node: int) -> str:
        return self._nodes[node]

    def add_node(self, label: str) -> int:
        self._check_mutable()
        lemma = concept_label(label)
        self._nodes.append(lemma)
        return len(self._nodes) - 1

    def add_edge(self, head: int, relation: str, tail: int) -> None:
        self._check_mutable()
        rel = relation_label(relation)
        for node in (head, tail):
            if not isinstance(node, int) or not 0 <= node < len(self._nodes):
                raise MissingNode(f"node {node!r} does not exist")
        if head == tail:
            raise SelfLoop(f"self-loop on node {head}")
        edge = (head, rel, tail)
        if edge in self._edge_set:
            raise DuplicateEdge(f"edge {edge} already present")
        self._edges.append(edge)
        self._edge_set.add(edge)

    def has_edge(self, head: int, relation: str, tail: int) -> bool:
        return (head, relation, tail) in self._edge_set

    def freeze(self) -> "SceneKG":
        self._frozen = True
        return self

    def copy(self) -> "SceneKG":
        g = SceneKG()
        g._nodes = list(self._nodes)
        g._edges = list(self._edges)
        g._edge_set = set(self._edge_set)
        return g

    def out_edges(self, node: int) -> Iterator[tuple[int, str, int]]:
        return (e for e in self._edges if e[0] == node)

    def in_edges(self, node: int) -> Iterator[tuple[int, str, int]]:
        return (e for e in self._edges if e[2] == node)

    def _check_mutable(self) -> None:
        if self._frozen:
            raise FrozenGraph("graph is frozen")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneKG):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((tuple(self._nodes), tuple(self._edges)))

    def __repr__(self) -> str:
        return f"SceneKG(nodes={self._nodes!r}, edges={self._edges!r})"


def lemma_triples(graph: SceneKG) -> set[Triple]:
    return {(graph.label(h), r, graph.label(t)) for h, r, t in graph.edges}


def node_lemmas(graph: SceneKG) -> Counter:
    return Counter(graph.nodes)


def lemma_set(graph: SceneKG) -> set[str]:
    return set(graph.nodes)


def is_weakly_connected(graph: SceneKG) -> bool:
    n = len(graph)
    if n == 0:
        raise EmptyGraph("connectivity is undefined for an empty graph")
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for h, _, t in graph.edges:
        rh, rt = find(h), find(t)
        if rh != rt:
            parent[rh] = rt
            components -= 1
    return components == 1


def weak_components(graph: SceneKG) -> list[list[int]]:
    """Node ids of each weakly connected component, ordered by smallest id."""
    adj: dict[int, list[int]] = {i: [] for i in range(len(graph))}
    for h, _, t in graph.edges:
        adj[h].append(t)
        adj[t].append(h)
    seen: set[int] = set()
    out = []
    for start in range(len(graph)):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        out.append(sorted(comp))
    return out


def subgraph(graph: SceneKG, keep: Iterable[int]) -> SceneKG:
    """Induced subgraph over ``keep`` with ids renumbered in ascending order."""
    order = sorted(set(keep))
    remap = {old: new for new, old in enumerate(order)}
    g = SceneKG()
    for old in order:
        g.add_node(graph.label(old))
    for h, r, t in graph.edges:
        if h in remap and t in remap:
            g.add_edge(remap[h], r, remap[t])
    return g


def validate(graph: SceneKG) -> None:
    """Full-scan invariant check; raises :class:`SKGError` on the first violation."""
    for lemma in graph.nodes:
        if concept_label(lemma) != lemma:
            raise InvalidLabel(f"stored label {lemma!r} carries a sense suffix")
    seen = set()
    for h, r, t in graph.edges:
        if not (0 <= h < len(graph) and 0 <= t < len(graph)):
            raise MissingNode(f"edge {(h, r, t)} references a missing node")
        if h == t:
            raise SelfLoop(f"self-loop on node {h}")
        if relation_label(r) != r:
            raise InvalidLabel(f"relation {r!r} is not canonical")
        if (h, r, t) in seen:
            raise DuplicateEdge(f"edge {(h, r, t)} duplicated")
        seen.add((h, r, t))
