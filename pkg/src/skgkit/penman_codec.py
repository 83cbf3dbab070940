"""PENMAN serialization of scene graphs.

Encoding walks a spanning tree depth-first from :func:`canonical_root`.
Out-edges are visited first, then in-edges; a node met for the first time
is written inline as ``(zN / lemma ...)`` and later incidences reuse the
bare variable.  An in-edge is written with an inverse role (``:ARG1-of``)
only when its head cannot be reached from the root along forward edges.

Decoding accepts the same grammar, normalizes inverse roles to forward
edges, and drops attribute constants (numbers, quoted strings, ``-``/``+``).
In lenient mode (the default) a few defects typical of generated text are
repaired and reported as warnings; unbalanced parentheses and missing
slashes are always errors.
"""

from __future__ import annotations

import logging
import re
from typing import NamedTuple
from dataclasses import dataclass

from .graph import (
    EmptyGraph,
    SceneKG,
    SKGError,
    is_weakly_connected,
    normalize_concept,
    relation_label,
)

log = logging.getLogger(__name__)

_CONSTANT = re.compile(r"^(?:[+-]|[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)$")


class DisconnectedGraph(SKGError):
    pass


class PenmanError(SKGError):
    """Decode failure located at a UTF-8 byte offset of the input."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EmptyInput(PenmanError):
    pass


class UnbalancedParens(PenmanError):
    pass


class MissingSlash(PenmanError):
    pass


class UndefinedVariable(PenmanError):
    pass


class DuplicateVariable(PenmanError):
    pass


class UnexpectedToken(PenmanError):
    pass


class UnterminatedString(PenmanError):
    pass


class InvalidGraphContent(PenmanError):
    """A syntactically valid construct that violates a graph invariant."""


# --------------------------------------------------------------------------
# encoding


def canonical_root(graph: SceneKG) -> int:
    n = len(graph)
    if n == 0:
        raise EmptyGraph("empty graph has no root")
    indeg = [0] * n
    outdeg = [0] * n
    for h, _, t in graph.edges:
        outdeg[h] += 1
        indeg[t] += 1
    sources = [v for v in range(n) if indeg[v] == 0]
    pool = sources or range(n)
    # max() keeps the first maximum, i.e. the smallest id
    return max(pool, key=lambda v: outdeg[v])


def forward_reachable(graph: SceneKG, root: int) -> set[int]:
    adj: dict[int, list[int]] = {}
    for h, _, t in graph.edges:
        adj.setdefault(h, []).append(t)
    seen = {root}
    stack = [root]
    while stack:
        for w in adj.get(stack.pop(), ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def encode(graph: SceneKG) -> str:
    if len(graph) == 0:
        raise EmptyGraph("cannot encode an empty graph")
    if not is_weakly_connected(graph):
        raise DisconnectedGraph("cannot encode a disconnected graph")

    edges = graph.edges
    out_adj: dict[int, list[int]] = {}
    in_adj: dict[int, list[int]] = {}
    for i, (h, _, t) in enumerate(edges):
        out_adj.setdefault(h, []).append(i)
        in_adj.setdefault(t, []).append(i)

    root = canonical_root(graph)
    forward = forward_reachable(graph, root)
    names: dict[int, str] = {}
    emitted: set[int] = set()
    parts: list[str] = []

    def visit(v: int, prefix: str) -> None:
        names[v] = f"z{len(names)}"
        parts.append(f"{prefix}({names[v]} / {graph.label(v)}")

    def incidences(v: int):
        for i in out_adj.get(v, ()):
            yield False, i
        for i in in_adj.get(v, ()):
            yield True, i

    visit(root, "")
    stack = [incidences(root)]
    while stack:
        for inverse, i in stack[-1]:
            if i in emitted:
                continue
            h, rel, t = edges[i]
            if not inverse:
                emitted.add(i)
                if t in names:
                    parts.append(f" :{rel} {names[t]}")
                    continue
                visit(t, f" :{rel} ")
                stack.append(incidences(t))
                break
            # the head writes this edge itself once it is (or was) visited
            if h in names or h in forward:
                continue
            emitted.add(i)
            visit(h, f" :{rel}-of ")
            stack.append(incidences(h))
            break
        else:
            parts.append(")")
            stack.pop()
    return "".join(parts)


# --------------------------------------------------------------------------
# decoding


class Token(NamedTuple):
    kind: str  # "(", ")", "/", "role", "string", "symbol"
    text: str
    pos: int  # character offset


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


_TOKEN = re.compile(
    r'(?P<ws>\s+)|(?P<punct>[()/])|(?P<string>"(?:\\.|[^"\\])*")|(?P<open>")'
    r'|(?P<role>:[^\s()/:"]*)|(?P<symbol>[^\s()/:"]+)',
    re.DOTALL,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    for m in _TOKEN.finditer(text):
        kind, start = m.lastgroup, m.start()
        if kind == "ws":
            continue
        if kind == "open":
            raise UnterminatedString("unterminated string literal", _byte_offset(text, start))
        tok = m.group()
        tokens.append(Token(tok if kind == "punct" else kind, tok, start))
    return tokens


class _Decoder:
    def __init__(self, text: str, strict: bool) -> None:
        self.text = text
        self.strict = strict
        self.tokens = tokenize(text)
        self.i = 0
        self.graph = SceneKG()
        self.vars: dict[str, int] = {}
        self.warnings: list[str] = []
        self.deferred: list[tuple[int, str, str, bool, Token]] = []
        self.declared = {
            self.tokens[k + 1].text
            for k in range(len(self.tokens) - 1)
            if self.tokens[k].kind == "(" and self.tokens[k + 1].kind == "symbol"
        }

    # helpers
    def off(self, tok: Token | None = None) -> int:
        if tok is None:
            return len(self.text.encode("utf-8"))
        return _byte_offset(self.text, tok.pos)

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise UnbalancedParens("unexpected end of input inside a node", self.off())
        self.i += 1
        return tok

    def warn(self, message: str, tok: Token | None) -> None:
        self.warnings.append(f"{message} (at byte {self.off(tok)})")

    def defect(self, exc: type[PenmanError], message: str, tok: Token | None) -> None:
        """Raise in strict mode, otherwise record a warning."""
        if self.strict:
            raise exc(message, self.off(tok))
        self.warn(message, tok)

    def new_node(self, label: str, tok: Token) -> int:
        try:
            return self.graph.add_node(normalize_concept(label))
        except SKGError as exc:
            raise InvalidGraphContent(str(exc), self.off(tok)) from None

    def relation(self, role: Token) -> tuple[str, bool]:
        name = role.text[1:]
        inverse = name.endswith("-of") and len(name) > 3
        if inverse:
            name = name[:-3]
        try:
            return relation_label(name), inverse
        except SKGError as exc:
            if self.strict:
                raise InvalidGraphContent(str(exc), self.off(role)) from None
            try:
                rel = relation_label(name.lower())
            except SKGError:
                raise InvalidGraphContent(str(exc), self.off(role)) from None
            self.warn(f"relation {name!r} normalized to {rel!r}", role)
            return rel, inverse

    def link(self, parent: int, rel: str, child: int, inverse: bool, tok: Token) -> None:
        head, tail = (child, parent) if inverse else (parent, child)
        if head == tail:
            self.defect(InvalidGraphContent, "self-loop edge", tok)
            return
        if self.graph.has_edge(head, rel, tail):
            self.defect(InvalidGraphContent, "duplicate edge", tok)
            return
        self.graph.add_edge(head, rel, tail)

    # grammar
    def open_node(self) -> int:
        """Consume ``( var / concept`` and return the new node id."""
        lp = self.take()
        if lp.kind != "(":
            raise UnexpectedToken(f"expected '(' but found {lp.text!r}", self.off(lp))
        var = self.take()
        if var.kind == "/":
            raise UnexpectedToken("missing variable before '/'", self.off(var))
        if var.kind != "symbol":
            raise UnexpectedToken(f"expected a variable but found {var.text!r}", self.off(var))
        slash = self.take()
        if slash.kind != "/":
            raise MissingSlash(f"expected '/' after variable {var.text!r}", self.off(slash))
        concept = self.take()
        if concept.kind != "symbol":
            raise UnexpectedToken(f"expected a concept but found {concept.text!r}", self.off(concept))
        node = self.new_node(concept.text, concept)
        if var.text in self.vars:
            self.defect(DuplicateVariable, f"variable {var.text!r} introduced twice", var)
        self.vars[var.text] = node
        return node

    def parse(self) -> SceneKG:
        if not self.tokens:
            raise EmptyInput("empty input", 0)
        first = self.peek()
        if first.kind == ")":
            raise UnbalancedParens("unmatched ')'", self.off(first))
        stack = [self.open_node()]
        while stack:
            tok = self.peek()
            if tok is None:
                raise UnbalancedParens("unexpected end of input inside a node", self.off())
            if tok.kind == ")":
                self.i += 1
                stack.pop()
                continue
            if tok.kind != "role":
                self.i += 1
                self.defect(UnexpectedToken, f"unexpected token {tok.text!r}", tok)
                continue
            self.i += 1
            if tok.text == ":":
                raise UnexpectedToken("empty role", self.off(tok))
            rel, inverse = self.relation(tok)
            target = self.peek()
            if target is None:
                raise UnbalancedParens("unexpected end of input after role", self.off())
            parent = stack[-1]
            if target.kind == "(":
                child = self.open_node()
                self.link(parent, rel, child, inverse, tok)
                stack.append(child)
            elif target.kind == "string":
                self.i += 1
            elif target.kind == "symbol":
                self.i += 1
                self.reference(parent, rel, inverse, target)
            else:
                self.defect(UnexpectedToken, f"role {tok.text!r} has no target", tok)
        rest = self.peek()
        if rest is not None:
            if rest.kind == ")":
                raise UnbalancedParens("unmatched ')'", self.off(rest))
            self.defect(UnexpectedToken, "trailing content after the root node", rest)
        for parent, rel, name, inverse, tok in self.deferred:
            if name not in self.vars:
                # declared only inside discarded trailing content
                self.warn(f"bare token {name!r} materialized as a concept", tok)
                self.vars[name] = self.new_node(name, tok)
            self.link(parent, rel, self.vars[name], inverse, tok)
        return self.graph

    def reference(self, parent: int, rel: str, inverse: bool, tok: Token) -> None:
        name = tok.text
        if name in self.vars:
            self.link(parent, rel, self.vars[name], inverse, tok)
        elif _CONSTANT.match(name):
            pass  # attribute value, not a concept
        elif self.strict:
            raise UndefinedVariable(f"variable {name!r} used before introduction", self.off(tok))
        elif name in self.declared:
            self.deferred.append((parent, rel, name, inverse, tok))
        else:
            self.warn(f"bare token {name!r} materialized as a concept", tok)
            child = self.new_node(name, tok)
            self.link(parent, rel, child, inverse, tok)


def decode_with_warnings(text: str, strict: bool = False) -> tuple[SceneKG, list[str]]:
    """Decode and also return the repairs made in lenient mode."""
    if not isinstance(text, str):
        raise TypeError("PENMAN input must be str")
    dec = _Decoder(text, strict)
    graph = dec.parse()
    for w in dec.warnings:
        log.debug("lenient decode: %s", w)
    return graph, dec.warnings


def decode(text: str, strict: bool = False) -> SceneKG:
    return decode_with_warnings(text, strict)[0]
