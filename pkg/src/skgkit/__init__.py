"""Scene knowledge graph toolkit.

Graphs of concept lemmas joined by typed relations, their PENMAN encoding,
corpus construction from AMR and visual scene graphs, training-instance
export, retrieval imagination, template verbalization, iterative generation
and graph/text metrics.
"""

from .graph import SceneKG, SKGError, lemma_set, lemma_triples, node_lemmas
from .penman_codec import decode, encode
from .imagination import ImaginationRequest, RetrievalImaginer, build_index
from .verbalization import TemplateVerbalizer, VerbalizationRequest, template_realize
from .pipeline import GenerationJob, run, run_batch

__all__ = [
    "SceneKG",
    "SKGError",
    "lemma_set",
    "lemma_triples",
    "node_lemmas",
    "encode",
    "decode",
    "ImaginationRequest",
    "RetrievalImaginer",
    "build_index",
    "TemplateVerbalizer",
    "VerbalizationRequest",
    "template_realize",
    "GenerationJob",
    "run",
    "run_batch",
]
