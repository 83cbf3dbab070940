"""Iterative imagine-then-verbalize generation over a sequence of concept sets."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import CONTEXT_LIMIT, truncate_context
from .graph import SceneKG, SKGError, lemma_set, normalize_concept
from .imagination import ImaginationRequest, Imaginer
from .penman_codec import encode
from .verbalization import VerbalizationRequest, Verbalizer

MODES = ("iterative", "independent")


@dataclass(frozen=True)
class GenerationJob:
    id: str
    initial_context: tuple[str, ...]
    concept_sets: tuple[tuple[str, ...], ...]
    mode: str = "iterative"

    def __post_init__(self) -> None:
        if not self.concept_sets:
            raise SKGError(f"job {self.id}: needs at least one concept set")
        sets = []
        for cs in self.concept_sets:
            cs = tuple(dict.fromkeys(normalize_concept(c) for c in cs))
            if not cs:
                raise SKGError(f"job {self.id}: empty concept set")
            sets.append(cs)
        if self.mode not in MODES:
            raise SKGError(f"job {self.id}: unknown mode {self.mode!r}")
        object.__setattr__(self, "initial_context", tuple(self.initial_context))
        object.__setattr__(self, "concept_sets", tuple(sets))


@dataclass
class StepDiagnostics:
    coverage: float
    fallback: bool
    context_length: int
    imagine_seconds: float = 0.0
    verbalize_seconds: float = 0.0

    def as_dict(self, timings: bool = False) -> dict:
        out = {"coverage": self.coverage, "fallback": self.fallback,
               "context_length": self.context_length}
        if timings:
            out["imagine_seconds"] = self.imagine_seconds
            out["verbalize_seconds"] = self.verbalize_seconds
        return out


@dataclass
class GenerationResult:
    job_id: str
    sentences: list[str] = field(default_factory=list)
    skgs: list[SceneKG] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    def to_dict(self, timings: bool = False) -> dict:
        return {
            "id": self.job_id,
            "sentences": list(self.sentences),
            "penman_skgs": [encode(g) for g in self.skgs],
            "diagnostics": {"steps": [d.as_dict(timings) for d in self.diagnostics]},
        }


class PipelineError(SKGError):
    """A backend failed mid-job; ``partial`` holds the steps completed before it."""

    def __init__(self, job_id: str, step: int, cause: Exception, partial: GenerationResult) -> None:
        super().__init__(f"job {job_id} failed at step {step}: {cause}")
        self.job_id = job_id
        self.step = step
        self.cause = cause
        self.partial = partial


def step_context(initial: Sequence[str], previous: Sequence[str], limit: int = CONTEXT_LIMIT) -> tuple[str, ...]:
    tokens = list(initial)
    for sentence in previous:
        tokens.extend(sentence.split())
    return truncate_context(tokens, limit)


def run(
    job: GenerationJob,
    imaginer: Imaginer,
    verbalizer: Verbalizer,
    context_limit: int = CONTEXT_LIMIT,
) -> GenerationResult:
    result = GenerationResult(job.id)
    for step, concepts in enumerate(job.concept_sets, 1):
        previous = result.sentences if job.mode == "iterative" else ()
        context = step_context(job.initial_context, previous, context_limit)
        try:
            t0 = time.perf_counter()
            imagined = imaginer.imagine(ImaginationRequest(context, concepts))
            t1 = time.perf_counter()
            sentence = verbalizer.verbalize(VerbalizationRequest(context, concepts, imagined.graph))
            t2 = time.perf_counter()
        except Exception as exc:
            raise PipelineError(job.id, step, exc, result) from exc
        covered = len(set(concepts) & lemma_set(imagined.graph)) / len(concepts)
        result.sentences.append(sentence)
        result.skgs.append(imagined.graph)
        result.diagnostics.append(
            StepDiagnostics(covered, imagined.fallback, len(context), t1 - t0, t2 - t1)
        )
    return result


def run_batch(
    jobs: Sequence[GenerationJob],
    imaginer: Imaginer,
    verbalizer: Verbalizer,
    parallelism: int = 1,
    context_limit: int = CONTEXT_LIMIT,
) -> list[GenerationResult | PipelineError]:
    """Run independent jobs; failures come back in place as :class:`PipelineError`."""

    def one(job: GenerationJob):
        try:
            return run(job, imaginer, verbalizer, context_limit)
        except PipelineError as exc:
            return exc

    if parallelism <= 1:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, jobs))


def read_jobs(path: str | Path, mode: str = "iterative") -> list[GenerationJob]:
    jobs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                jobs.append(GenerationJob(
                    id=str(obj["id"]),
                    initial_context=tuple(str(obj.get("context", "")).split()),
                    concept_sets=tuple(tuple(cs) for cs in obj["concept_sets"]),
                    mode=obj.get("mode", mode),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SKGError(f"{path}:{lineno}: malformed job ({exc})") from None
    return jobs


def result_line(outcome: GenerationResult | PipelineError, timings: bool = False) -> str:
    if isinstance(outcome, PipelineError):
        obj = outcome.partial.to_dict(timings)
        obj["error"] = str(outcome)
    else:
        obj = outcome.to_dict(timings)
    return json.dumps(obj, ensure_ascii=False)


def read_results(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_results(outcomes: Iterable, path: str | Path, timings: bool = False) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(result_line(outcome, timings) + "\n")
            n += 1
    return n
