"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
import random
import re
from collections import Counter

from skgkit.graph import SceneKG

RELATIONS = ["ARG0", "ARG1", "ARG2", "location", "part", "poss", "mod", "time"]


def random_connected_graph(rng: random.Random, max_nodes: int = 12, max_edges: int = 16,
                           alphabet: int = 20) -> SceneKG:
    """Random weakly connected graph: a random spanning tree plus extra edges."""
    lemmas = [f"c{k}" for k in range(alphabet)]
    n = rng.randint(1, max_nodes)
    g = SceneKG()
    for _ in range(n):
        g.add_node(rng.choice(lemmas))
    for v in range(1, n):
        u = rng.randrange(v)
        head, tail = (u, v) if rng.random() < 0.5 else (v, u)
        g.add_edge(head, rng.choice(RELATIONS), tail)
    target = rng.randint(max(n - 1, 0), max(n - 1, max_edges))
    attempts = 0
    while len(g.edges) < target and n > 1 and attempts < 200:
        attempts += 1
        h, t = rng.sample(range(n), 2)
        rel = rng.choice(RELATIONS)
        if not g.has_edge(h, rel, t):
            g.add_edge(h, rel, t)
    return g


def connected(n: int, edges) -> bool:
    seen, stack = {0}, [0]
    adj = {v: set() for v in range(n)}
    for h, _, t in edges:
        adj[h].add(t)
        adj[t].add(h)
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def small_graphs(max_nodes: int = 4, max_edges: int = 4, lemmas=("a", "b", "c"), relations=("r",)):
    """Every connected labelled graph within the bounds, as (labels, edges)."""
    for n in range(1, max_nodes + 1):
        slots = [(h, r, t) for h in range(n) for t in range(n) if h != t for r in relations]
        edge_sets = [()] if n == 1 else [
            es for k in range(n - 1, max_edges + 1) for es in itertools.combinations(slots, k)
            if connected(n, es)
        ]
        for labels in itertools.product(lemmas, repeat=n):
            for es in edge_sets:
                yield labels, es


def isomorphic(g: SceneKG, h: SceneKG) -> bool:
    """Brute-force label- and edge-preserving bijection search."""
    if sorted(g.nodes) != sorted(h.nodes) or len(g.edges) != len(h.edges):
        return False
    target = set(h.edges)
    n = len(g)
    for perm in itertools.permutations(range(n)):
        if any(g.label(v) != h.label(perm[v]) for v in range(n)):
            continue
        if {(perm[a], r, perm[b]) for a, r, b in g.edges} == target:
            return True
    return False


_ALPHA = re.compile(r"[a-z]+(?:'[a-z]+)?")


def words(text: str) -> set[str]:
    return set(_ALPHA.findall(text.lower()))


def brute_force_best(records, concepts, context) -> str | None:
    """Linear scan with the documented lexicographic score."""
    want = set(concepts)
    ctx = words(" ".join(context))
    best, best_key = None, None
    for rec in records:
        cover = len(want & set(rec.skg.nodes))
        overlap = len(ctx & (words(" ".join(rec.context)) | words(rec.sentence)))
        key = (cover, overlap, -len(rec.skg.nodes))
        if cover == 0:
            continue
        if best is None or key > best_key or (key == best_key and rec.id < best):
            best, best_key = rec.id, key
    return best


FUZZ_PIECES = ["(", ")", "/", ":", ":ARG0", ":ARG1-of", "z0", "z1", "z9", "dog", '"', '"x"', " ", "-", "7", "é", "~"]


def mutate(text: str, rng: random.Random) -> str:
    """Apply 1-4 random character/token edits."""
    s = text
    for _ in range(rng.randint(1, 4)):
        op = rng.randrange(5)
        i = rng.randrange(len(s) + 1)
        if op == 0 and s:
            s = s[:i] + s[i + 1:]
        elif op == 1:
            s = s[:i] + rng.choice(FUZZ_PIECES) + s[i:]
        elif op == 2:
            s = s[:i]
        elif op == 3 and s:
            j = rng.randrange(len(s) + 1)
            a, b = sorted((i, j))
            s = s[:a] + s[b:] + s[a:b]
        else:
            s = s[:i] + s[i:i + rng.randint(1, 8)] + s[i:]
    return s


def hand_bleu1(candidate: list[str], reference: list[str]) -> float:
    import math
    cc, rc = Counter(candidate), Counter(reference)
    p = sum(min(c, rc[w]) for w, c in cc.items()) / len(candidate)
    bp = 1.0 if len(candidate) > len(reference) else math.exp(1 - len(reference) / len(candidate))
    return bp * p


def reference_corpus_bleu(candidates, reference_sets, n):
    """Textbook corpus BLEU, written out longhand."""
    import math

    tok = lambda s: re.findall(r"\w+|[^\w\s]", s.lower())  # noqa: E731
    matches, totals = [0] * n, [0] * n
    c_len = r_len = 0
    for cand, refs in zip(candidates, reference_sets):
        c = tok(cand)
        rs = [tok(r) for r in refs]
        c_len += len(c)
        best = None
        for r in rs:
            if best is None or abs(len(r) - len(c)) < abs(best - len(c)) or (
                    abs(len(r) - len(c)) == abs(best - len(c)) and len(r) < best):
                best = len(r)
        r_len += best
        for k in range(1, n + 1):
            grams = [tuple(c[i:i + k]) for i in range(len(c) - k + 1)]
            for g in set(grams):
                ref_max = max(sum(1 for i in range(len(r) - k + 1) if tuple(r[i:i + k]) == g) for r in rs)
                matches[k - 1] += min(grams.count(g), ref_max)
            totals[k - 1] += len(grams)
    logs = [math.log(m / t) if m else math.log(1e-9) for m, t in zip(matches, totals)]
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return bp * math.exp(sum(logs) / n)
