"""A scene graph, its PENMAN text and a sentence realized from it.

    python demos/01_graphs_and_penman.py
"""

from skgkit import SceneKG, decode, encode, lemma_triples, template_realize
from skgkit.penman_codec import PenmanError, decode_with_warnings
from skgkit.vg import VisualTriple, map_scene_graph

# A dog chases a ball that its owner throws.  The ball is shared by both
# frames, so the graph is not a tree.
scene = SceneKG.from_triples([
    ("chase", "ARG0", "dog"),
    ("chase", "ARG1", "ball"),
    ("throw", "ARG1", "ball"),
    ("throw", "ARG0", "owner"),
])
text = encode(scene)
print("PENMAN:   ", text)
print("sentence: ", template_realize(scene))

# Decoding gives back the same lemma-level triples.
assert lemma_triples(decode(text)) == lemma_triples(scene)

# Generated graphs are often slightly broken.  The lenient decoder repairs
# what it can and says what it did; truncated text is still an error.
graph, warnings = decode_with_warnings("(z0 / hold :ARG0 man :ARG1 (z1 / bottle)) extra")
print("repaired: ", encode(graph))
for w in warnings:
    print("  warning:", w)
try:
    decode("(z0 / dog :ARG0 (z1")
except PenmanError as exc:
    print(f"error:     {exc} [{type(exc).__name__}, byte {exc.offset}]")

# Visual scene-graph triples map onto the same relation vocabulary.
visual = map_scene_graph([
    VisualTriple("man", "throw", "frisbee", predicate_is_verb=True),
    VisualTriple("man", "with", "hat"),
    VisualTriple("dog", "on", "grass"),
    VisualTriple("dog", "have", "ear"),
])
print("visual:   ", sorted(lemma_triples(visual)))
