"""Word lists, rule-based lemmatization and lexicon-driven noun/verb tagging."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

PRONOUNS = frozenset("i you he she it we they".split())
_TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)?")


def read_wordlist(path: str | Path) -> list[str]:
    """One entry per line; blank lines and ``#`` comments are skipped."""
    with open(path, encoding="utf-8") as fh:
        return _parse_lines(fh.read())


def _parse_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _bundled(name: str) -> list[str]:
    return _parse_lines(resources.files("skgkit").joinpath("data").joinpath(name).read_text("utf-8"))


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Lexicon:
    verbs: frozenset[str]
    nouns: frozenset[str]
    exceptions: dict[str, str] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()

    @classmethod
    def from_files(cls, verbs, nouns, exceptions=None, stopwords=None) -> "Lexicon":
        table = {}
        if exceptions is not None:
            for line in read_wordlist(exceptions):
                form, lemma = line.split()[:2]
                table[form] = lemma
        return cls(
            verbs=frozenset(read_wordlist(verbs)),
            nouns=frozenset(read_wordlist(nouns)),
            exceptions=table,
            stopwords=frozenset(read_wordlist(stopwords)) if stopwords else frozenset(),
        )

    def lemma_candidates(self, word: str) -> list[str]:
        """Possible lemmas of ``word``, most specific first."""
        cands = [self.exceptions[word]] if word in self.exceptions else []
        cands.append(word)
        if word.endswith("ies") and len(word) > 4:
            cands.append(word[:-3] + "y")
        if word.endswith("ied") and len(word) > 4:
            cands.append(word[:-3] + "y")
        if word.endswith("es") and len(word) > 3:
            cands.append(word[:-2])
        if word.endswith("s") and not word.endswith("ss") and len(word) > 2:
            cands.append(word[:-1])
        for suffix in ("ing", "ed"):
            if word.endswith(suffix) and len(word) > len(suffix) + 2:
                stem = word[: -len(suffix)]
                cands.append(stem)
                cands.append(stem + "e")
                if len(stem) > 2 and stem[-1] == stem[-2]:
                    cands.append(stem[:-1])  # running -> run
        return cands

    def lemmatize(self, word: str, pos: str) -> str | None:
        """Lemma of ``word`` as a ``"noun"`` or ``"verb"``, or None if unknown."""
        vocab = self.verbs if pos == "verb" else self.nouns
        for cand in self.lemma_candidates(word):
            if cand in vocab:
                return cand
        return None

    def tag(self, tokens: list[str]) -> list[tuple[str, str, str] | None]:
        """Tag each token as ``(token, pos, lemma)`` or None for other words.

        Words lemmatizing into both lexicons are verbs after "to" or a
        pronoun and nouns otherwise.
        """
        out = []
        for i, tok in enumerate(tokens):
            if tok in self.stopwords:
                out.append(None)
                continue
            verb = self.lemmatize(tok, "verb")
            noun = self.lemmatize(tok, "noun")
            if verb and noun:
                prev = tokens[i - 1] if i else ""
                pos = "verb" if prev == "to" or prev in PRONOUNS else "noun"
            elif verb:
                pos = "verb"
            elif noun:
                pos = "noun"
            else:
                out.append(None)
                continue
            out.append((tok, pos, verb if pos == "verb" else noun))
        return out

    def verb_lemma(self, word: str) -> str | None:
        return self.lemmatize(word.lower(), "verb")


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    table = {}
    for line in _bundled("exceptions.txt"):
        form, lemma = line.split()[:2]
        table[form] = lemma
    return Lexicon(
        verbs=frozenset(_bundled("verbs.txt")),
        nouns=frozenset(_bundled("nouns.txt")),
        exceptions=table,
        stopwords=frozenset(_bundled("stopwords.txt")),
    )


@lru_cache(maxsize=1)
def spatial_predicates() -> frozenset[str]:
    return frozenset(_bundled("spatial_predicates.txt"))
