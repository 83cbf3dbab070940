"""Verbalization: input assembly and a deterministic template realizer.

The template realizer is a stand-in for a trained verbalizer so the whole
pipeline can run, and be scored, without a neural backend.  Nodes with
``ARG*`` out-edges are treated as predicates and realized as clauses
(subject, verb with third-person ``-s``, arguments, modifiers); every other
node becomes a noun phrase with an indefinite article on first mention and
``the`` afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .graph import EmptyGraph, SceneKG, is_weakly_connected, normalize_concept
from .instances import format_input
from .penman_codec import DisconnectedGraph, canonical_root, forward_reachable, encode

ARG_ROLES = ("ARG0", "ARG1", "ARG2", "ARG3", "ARG4")
MODIFIER_ORDER = ("location", "time", "instrument", "purpose", "poss", "part", "medium")
CONNECTIVES = {
    "location": "in",
    "time": "when",
    "instrument": "with",
    "purpose": "to",
    "poss": "of",
    "part": "of",
    "medium": "on",
}
IRREGULAR_3SG = {"be": "is", "have": "has", "do": "does", "go": "goes"}


@dataclass(frozen=True)
class VerbalizationRequest:
    context: tuple[str, ...]
    concepts: tuple[str, ...]
    skg: SceneKG

    def __post_init__(self) -> None:
        if len(self.skg) == 0:
            raise EmptyGraph("verbalization needs a non-empty graph")
        object.__setattr__(self, "context", tuple(self.context))
        object.__setattr__(self, "concepts", tuple(normalize_concept(c) for c in self.concepts))


class Verbalizer(Protocol):
    def verbalize(self, request: VerbalizationRequest) -> str: ...


def assemble_input(
    request: VerbalizationRequest, include_context: bool = True, include_concepts: bool = True
) -> str:
    """Flat model input: context (or ``none``), sorted concepts and PENMAN, ``<sep>``-joined."""
    return format_input(
        request.context,
        sorted(set(request.concepts)),
        encode(request.skg),
        include_context=include_context,
        include_concepts=include_concepts,
    )


def third_person(verb: str) -> str:
    if verb in IRREGULAR_3SG:
        return IRREGULAR_3SG[verb]
    if verb.endswith(("s", "x", "z", "ch", "sh", "o")):
        return verb + "es"
    if len(verb) > 1 and verb.endswith("y") and verb[-2] not in "aeiou":
        return verb[:-1] + "ies"
    return verb + "s"


def article(noun: str) -> str:
    return "an" if noun[0] in "aeiou" else "a"


def _modifier_rank(rel: str) -> int:
    return MODIFIER_ORDER.index(rel) if rel in MODIFIER_ORDER else len(MODIFIER_ORDER)


class _Realizer:
    def __init__(self, graph: SceneKG) -> None:
        self.g = graph
        self.edges = graph.edges
        self.out: dict[int, list[int]] = {}
        self.inc: dict[int, list[int]] = {}
        for i, (h, _, t) in enumerate(self.edges):
            self.out.setdefault(h, []).append(i)
            self.inc.setdefault(t, []).append(i)
        self.mentioned: set[int] = set()
        self.used: set[int] = set()
        self.root = canonical_root(graph)
        self.forward = forward_reachable(graph, self.root)

    def is_predicate(self, v: int) -> bool:
        return any(self.edges[i][1] in ARG_ROLES for i in self.out.get(v, ()))

    def take(self, v: int, roles=None) -> list[int]:
        """Unused out-edges of ``v`` (optionally restricted to ``roles``), marked used."""
        picked = [
            i for i in self.out.get(v, ())
            if i not in self.used and (roles is None or self.edges[i][1] in roles)
        ]
        self.used.update(picked)
        return picked

    def modifiers(self, v: int) -> list[int]:
        picked = self.take(v)
        return sorted(picked, key=lambda i: _modifier_rank(self.edges[i][1]))

    # phrases
    def argument(self, v: int) -> str:
        if v not in self.mentioned and self.is_predicate(v):
            return self.infinitive(v)
        return self.noun_phrase(v)

    def modifier(self, i: int) -> str:
        _, rel, t = self.edges[i]
        fresh_pred = t not in self.mentioned and self.is_predicate(t)
        if rel == "purpose" and fresh_pred:
            return self.infinitive(t)
        if rel == "time" and fresh_pred:
            return "when " + self.clause(t)
        return f"{CONNECTIVES.get(rel, 'with')} {self.argument(t)}"

    def noun_phrase(self, v: int) -> str:
        lemma = self.g.label(v)
        if v in self.mentioned:
            return f"the {lemma}"
        self.mentioned.add(v)
        phrase = f"{article(lemma)} {lemma}"
        suffixes = []
        owned = False
        for i in self.modifiers(v):
            _, rel, t = self.edges[i]
            if rel == "poss" and not owned:
                phrase = f"{self.argument(t)}'s {lemma}"
                owned = True
            else:
                suffixes.append(self.modifier(i))
        return " ".join([phrase, *suffixes, *self.relatives(v)])

    def relatives(self, v: int) -> list[str]:
        out = []
        for i in self.inc.get(v, ()):
            h, rel, _ = self.edges[i]
            # heads reachable from the root mention this edge themselves
            if i in self.used or h in self.mentioned or h in self.forward:
                continue
            self.used.add(i)
            if self.is_predicate(h):
                body = self.clause(h)
                if rel not in ARG_ROLES:
                    body += " " + CONNECTIVES.get(rel, "with")
            else:
                body = f"{self.noun_phrase(h)} is {CONNECTIVES.get(rel, 'with')}"
            out.append(("and that " if out else "that ") + body)
        return out

    def clause(self, v: int, form: str = "finite") -> str:
        self.mentioned.add(v)
        subjects = [self.edges[i][2] for i in self.take(v, ("ARG0",))]
        if form == "infinitive":
            fresh = [s for s in subjects if s not in self.mentioned]
            subject = " and ".join(self.argument(s) for s in fresh)
        else:
            subject = " and ".join(self.argument(s) for s in subjects)
        objects = []
        for role in ARG_ROLES[1:]:
            objects += [self.argument(self.edges[i][2]) for i in self.take(v, (role,))]
        mods = [self.modifier(i) for i in self.modifiers(v)]
        rels = self.relatives(v)
        lemma = self.g.label(v)
        if form == "infinitive":
            verb = f"for {subject} to {lemma}" if subject else f"to {lemma}"
            return " ".join([verb, *objects, *mods, *rels])
        return " ".join(p for p in [subject, third_person(lemma), *objects, *mods, *rels] if p)

    def infinitive(self, v: int) -> str:
        return self.clause(v, form="infinitive")

    def sentence(self) -> str:
        root = self.root
        body = self.clause(root) if self.is_predicate(root) else self.noun_phrase(root)
        return body[0].upper() + body[1:] + "."


def template_realize(graph: SceneKG) -> str:
    if len(graph) == 0:
        raise EmptyGraph("cannot realize an empty graph")
    if not is_weakly_connected(graph):
        raise DisconnectedGraph("cannot realize a disconnected graph")
    return _Realizer(graph).sentence()


class TemplateVerbalizer:
    def verbalize(self, request: VerbalizationRequest) -> str:
        return template_realize(request.skg)

