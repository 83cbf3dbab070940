"""Text and graph metrics: corpus BLEU-n and recall of concepts and relations.

BLEU uses clipped n-gram precision, uniform weights and the closest-length
brevity penalty.  A zero match count at some order is replaced by
``BLEU_EPSILON`` as that order's precision, so the score for completely
disjoint unigrams of equal length is exactly ``BLEU_EPSILON``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import TaskItem, silver_graph
from .graph import SceneKG, SKGError, lemma_set, lemma_triples
from .penman_codec import PenmanError, decode

BLEU_EPSILON = 1e-9
MAX_ORDER = 4
_WORD = re.compile(r"\w+|[^\w\s]")


class EvaluationError(SKGError):
    pass


def bleu_tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    """Sufficient statistics for corpus BLEU; merge with ``+``."""

    matches: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    candidate_length: int = 0
    reference_length: int = 0

    @classmethod
    def of(cls, candidate: str, references: Sequence[str]) -> "BleuStats":
        cand = bleu_tokens(candidate)
        refs = [bleu_tokens(r) for r in references]
        if not refs:
            raise EvaluationError("every candidate needs at least one reference")
        stats = cls()
        stats.candidate_length = len(cand)
        # closest reference length, shorter wins ties
        stats.reference_length = min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
        for n in range(1, MAX_ORDER + 1):
            counts = _ngrams(cand, n)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= _ngrams(r, n)
            stats.matches[n - 1] = sum(min(c, max_ref[g]) for g, c in counts.items())
            stats.totals[n - 1] = max(len(cand) - n + 1, 0)
        return stats

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.candidate_length + other.candidate_length,
            self.reference_length + other.reference_length,
        )

    def precision(self, n: int) -> float:
        m, t = self.matches[n - 1], self.totals[n - 1]
        return m / t if m > 0 else BLEU_EPSILON

    def brevity_penalty(self) -> float:
        c, r = self.candidate_length, self.reference_length
        if c == 0:
            return 0.0
        return 1.0 if c > r else math.exp(1 - r / c)

    def score(self, n: int) -> float:
        if not 1 <= n <= MAX_ORDER:
            raise ValueError(f"BLEU order must be within 1..{MAX_ORDER}")
        # geometric mean; a plain product keeps n=1 exact
        mean = math.prod(self.precision(k) for k in range(1, n + 1)) ** (1 / n)
        return self.brevity_penalty() * mean


def corpus_bleu_stats(candidates: Sequence[str], reference_sets: Sequence[Sequence[str]]) -> BleuStats:
    if not candidates:
        raise EvaluationError("no candidates to score")
    if len(candidates) != len(reference_sets):
        raise EvaluationError("candidates and reference sets differ in length")
    total = BleuStats()
    for cand, refs in zip(candidates, reference_sets):
        total = total + BleuStats.of(cand, refs)
    return total


def bleu_n(candidates: Sequence[str], reference_sets: Sequence[Sequence[str]], n: int = 4) -> float:
    return corpus_bleu_stats(candidates, reference_sets).score(n)


# --------------------------------------------------------------------------
# graph recall


def explicit_concept_recall(generated: SceneKG, given: Iterable[str]) -> float:
    given = set(given)
    if not given:
        raise EvaluationError("the given concept set is empty")
    return len(given & lemma_set(generated)) / len(given)


def implicit_concept_recall(generated: SceneKG, silver: SceneKG, given: Iterable[str]) -> float | None:
    """Recall of the silver nodes outside ``given``; None when there are none."""
    implicit = lemma_set(silver) - set(given)
    if not implicit:
        return None
    return len(lemma_set(generated) & implicit) / len(implicit)


def relation_recall(generated: SceneKG, silver: SceneKG) -> float:
    reference = lemma_triples(silver)
    if not reference:
        raise EvaluationError("the silver graph has no edges")
    return len(lemma_triples(generated) & reference) / len(reference)


# --------------------------------------------------------------------------
# run evaluation


@dataclass
class InstanceScores:
    id: str
    step: int
    explicit: float
    implicit: float | None
    relation: float | None


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


@dataclass
class EvalReport:
    bleu: dict[int, float]
    instances: list[InstanceScores]

    def _values(self, name: str) -> list[float]:
        return [getattr(s, name) for s in self.instances if getattr(s, name) is not None]

    @property
    def explicit_recall(self) -> float:
        return _mean(self._values("explicit"))

    @property
    def implicit_recall(self) -> float:
        return _mean(self._values("implicit"))

    @property
    def relation_recall(self) -> float:
        return _mean(self._values("relation"))

    def counts(self) -> dict[str, int]:
        return {name: len(self._values(name)) for name in ("explicit", "implicit", "relation")}

    def as_dict(self) -> dict:
        counts = self.counts()
        return {
            "bleu": {str(n): s for n, s in self.bleu.items()},
            "explicit_recall": {"mean": self.explicit_recall, "count": counts["explicit"]},
            "implicit_recall": {"mean": self.implicit_recall, "count": counts["implicit"]},
            "relation_recall": {"mean": self.relation_recall, "count": counts["relation"]},
            "instances": [vars(s) for s in self.instances],
        }

    def table(self) -> str:
        counts = self.counts()
        rows = [(f"BLEU-{n}", f"{s:.4f}", str(len(self.instances))) for n, s in self.bleu.items()]
        rows += [
            ("Explicit concepts", f"{self.explicit_recall:.4f}", str(counts["explicit"])),
            ("Implicit concepts", f"{self.implicit_recall:.4f}", str(counts["implicit"])),
            ("Relation", f"{self.relation_recall:.4f}", str(counts["relation"])),
        ]
        w = max(len(r[0]) for r in rows)
        lines = [f"{'Metric':<{w}}  {'Score':>8}  {'N':>6}"]
        lines += [f"{a:<{w}}  {b:>8}  {c:>6}" for a, b, c in rows]
        return "\n".join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "step", "explicit", "implicit", "relation"])
        for s in self.instances:
            writer.writerow([s.id, s.step, s.explicit, "" if s.implicit is None else s.implicit,
                             "" if s.relation is None else s.relation])
        return buf.getvalue()


def evaluate_run(results: Sequence[dict], references: Sequence[TaskItem]) -> EvalReport:
    """Score pipeline results against an id-aligned task file.

    Instances whose silver graph has no implicit concepts, or no edges, are
    left out of the implicit or relation averages respectively.
    """
    by_id = {str(r["id"]): r for r in results}
    ref_ids = {item.id for item in references}
    missing = sorted(ref_ids - by_id.keys())
    extra = sorted(by_id.keys() - ref_ids)
    if missing or extra:
        raise EvaluationError(f"id mismatch: missing results {missing}, unknown results {extra}")

    candidates, reference_sets, scores = [], [], []
    for item in references:
        res = by_id[item.id]
        sentences, graphs = res.get("sentences", []), res.get("penman_skgs", [])
        k = len(item.concept_sets)
        if len(sentences) != k or len(graphs) != k or len(item.sentences) != k or len(item.penman_graphs) != k:
            raise EvaluationError(f"{item.id}: expected {k} sentences and graphs on both sides")
        for step in range(k):
            try:
                generated = decode(graphs[step])
                silver = silver_graph(item.penman_graphs[step])
            except (PenmanError, SKGError) as exc:
                raise EvaluationError(f"{item.id} step {step + 1}: {exc}") from None
            given = item.concept_sets[step]
            scores.append(InstanceScores(
                id=item.id,
                step=step + 1,
                explicit=explicit_concept_recall(generated, given),
                implicit=implicit_concept_recall(generated, silver, given),
                relation=relation_recall(generated, silver) if silver.edges else None,
            ))
            candidates.append(sentences[step])
            reference_sets.append([item.sentences[step]])
    stats = corpus_bleu_stats(candidates, reference_sets)
    return EvalReport({n: stats.score(n) for n in range(1, MAX_ORDER + 1)}, scores)


def report_json(report: EvalReport) -> str:
    return json.dumps(report.as_dict(), indent=2)
