import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from skgkit.corpus import (
    ArityError,
    CorpusFormatError,
    CorpusRecord,
    CorpusStats,
    TaskItem,
    corpus_stats,
    dumps_record,
    extract_concept_set,
    filter_overlap,
    ingest_amr,
    make_silver_skgs,
    map_vg_records,
    read_corpus,
    read_task_file,
    truncate_context,
    validate_record,
    write_corpus,
)
from skgkit.graph import SceneKG, SKGError
from skgkit.lexicon import Lexicon, default_lexicon

from conftest import CHASE_SCENE


def record(rid, source, triples, sentence="", context=(), concepts=None):
    g = SceneKG.from_triples(triples)
    return CorpusRecord(rid, source, tuple(context), sentence, g,
                        frozenset(g.nodes if concepts is None else concepts))


# ---------------------------------------------------------------- concepts

@pytest.mark.parametrize("sentence, expected", [
    ("A man throws a frisbee and his dog catches it", {"man", "throw", "frisbee", "dog", "catch"}),
    ("the the the", set()),
    ("children ran quickly", {"child", "run"}),
    ("Two dogs are chasing the balls.", {"dog", "chase", "ball"}),
])
def test_extract_concept_set(sentence, expected):
    assert extract_concept_set(sentence) == expected


def test_ambiguous_words_use_priority_rule():
    base = default_lexicon()
    lex = Lexicon(frozenset({"play", "like"}), frozenset({"play", "child"}), base.exceptions, base.stopwords)
    tags = lex.tag(["they", "play", "a", "play"])
    assert tags[1][1] == "verb" and tags[3][1] == "noun"
    assert lex.tag(["to", "play"])[1][1] == "verb"
    assert extract_concept_set("the children like to play", lex) == {"child", "like", "play"}


def test_truncate_context_keeps_most_recent():
    tokens = [f"t{i}" for i in range(300)]
    kept = truncate_context(tokens)
    assert len(kept) == 256 and kept[0] == "t44" and kept[-1] == "t299"


# ---------------------------------------------------------------- records

def test_record_invariants():
    with pytest.raises(SKGError):
        validate_record(record("v", "visual", CHASE_SCENE, sentence="not empty"))
    with pytest.raises(SKGError):
        validate_record(record("c", "caption", CHASE_SCENE, sentence="x", context=["a"]))
    with pytest.raises(SKGError):
        validate_record(record("c", "caption", CHASE_SCENE, sentence="x", concepts={"cat"}))
    validate_record(record("s", "story", CHASE_SCENE, sentence="x", context=["a"] * 256))


def test_corpus_round_trip(tmp_path):
    recs = [record("a", "caption", CHASE_SCENE, "A dog chases a ball."),
            record("b", "story", [("eat", "ARG0", "café")], "x", context=["hi"])]
    path = tmp_path / "c.jsonl"
    assert write_corpus(recs, path) == 2
    back = read_corpus(path)
    assert [dumps_record(r) for r in back] == [dumps_record(r) for r in recs]
    (tmp_path / "bad.jsonl").write_text("{not json}\n")
    with pytest.raises(CorpusFormatError):
        read_corpus(tmp_path / "bad.jsonl")


# ---------------------------------------------------------------- ingestion

def test_ingest_amr_text_blocks(fixtures_dir):
    result = ingest_amr(fixtures_dir / "amr_sample.txt")
    assert [r.id for r in result.records] == ["cap-1", "cap-2", "cap-4"]
    assert [rid for rid, _ in result.errors] == ["cap-3"]
    first = result.records[0]
    assert first.context == () and first.source == "caption"
    assert first.concept_set == {"man", "throw", "frisbee", "dog", "catch"}
    # the numeric quantity node is pruned
    assert "2" not in result.records[1].skg.nodes


def test_ingest_story_context_truncated_and_idempotent(tmp_path):
    path = tmp_path / "story.jsonl"
    ctx = " ".join(f"w{i}" for i in range(300))
    path.write_text(json.dumps({"id": "s1", "sentence": "The dog ran.", "context": ctx,
                                "penman": "(r / run-02 :ARG0 (d / dog))"}) + "\n")
    a = ingest_amr(path, source="story")
    b = ingest_amr(path, source="story", parallelism=2)
    rec = a.records[0]
    assert len(rec.context) == 256 and rec.context[0] == "w44"
    assert rec.concept_set == {"dog", "run"}
    assert [dumps_record(r) for r in a.records] == [dumps_record(r) for r in b.records]


def test_ingest_malformed_file_is_fatal(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"id": 1}\n')
    with pytest.raises(CorpusFormatError):
        ingest_amr(path)


def test_map_vg_records(fixtures_dir):
    with open(fixtures_dir / "vg_sample.jsonl") as fh:
        result = map_vg_records(fh)
    ids = [r.id for r in result.records]
    assert ids == ["visual-1", "visual-2#0", "visual-2#1", "visual-3"]
    for r in result.records:
        validate_record(r)
        assert r.sentence == "" and r.concept_set == set(r.skg.nodes)


# ---------------------------------------------------------------- silver task graphs

def _item(k, graphs=None):
    sents = [f"Sentence number {i} about a dog." for i in range(1, k + 1)]
    return TaskItem("st", ("Once", "upon"), tuple(frozenset({"dog", "run"}) for _ in range(k)),
                    tuple(sents), tuple(graphs if graphs is not None else ["(r / run :ARG0 (d / dog))"] * k))


def test_make_silver_story():
    result = make_silver_skgs([_item(4)])
    assert [r.id for r in result.records] == ["st-1", "st-2", "st-3", "st-4"]
    third = " ".join(result.records[2].context)
    assert third == "Once upon Sentence number 1 about a dog. Sentence number 2 about a dog."
    assert all(r.source == "task" and r.concept_set == {"dog", "run"} for r in result.records)


def test_make_silver_single_and_arity():
    single = TaskItem("cg", (), (frozenset({"dog"}),), ("A dog.",), ("(d / dog)",))
    assert make_silver_skgs([single]).records[0].context == ()
    result = make_silver_skgs([_item(3, ["(d / dog)"] * 4)])
    assert result.records == [] and "st" in result.errors[0][0]
    assert "graphs" in result.errors[0][1]


def test_read_task_file(fixtures_dir):
    items = read_task_file(fixtures_dir / "task.jsonl")
    assert len(items) == 3 and all(len(i.concept_sets) == 4 for i in items)


# ---------------------------------------------------------------- leakage filter

def test_filter_overlap_examples():
    rec = record("r", "caption", CHASE_SCENE, "x")
    assert filter_overlap([rec], [{"dog", "ball", "chase"}]) == ([], 1)
    assert filter_overlap([rec], [{"dog", "cat"}]) == ([rec], 0)
    assert filter_overlap([rec], []) == ([rec], 0)


def brute_filter(corpus, forbidden):
    return [r for r in corpus if not any(set(f) <= set(r.skg.nodes) for f in forbidden if f)]


LEMMAS = ["a", "b", "c", "d", "e", "f"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sets(st.sampled_from(LEMMAS), min_size=1, max_size=3), max_size=6),
       st.lists(st.sets(st.sampled_from(LEMMAS), min_size=1, max_size=3), max_size=3),
       st.integers(0, 1000))
def test_filter_matches_oracle_and_is_monotone(forbidden, extra, seed):
    rng = random.Random(seed)
    corpus = []
    for k in range(15):
        names = rng.sample(LEMMAS, rng.randint(1, 4))
        corpus.append(record(f"r{k}", "visual", [(names[0], "other", n) for n in names[1:]] or [],
                             concepts=set()) if len(names) > 1 else
                      CorpusRecord(f"r{k}", "visual", (), "", _single(names[0]), frozenset()))
    retained, removed = filter_overlap(corpus, forbidden)
    assert retained == brute_filter(corpus, forbidden)
    assert removed == len(corpus) - len(retained)
    bigger, _ = filter_overlap(corpus, forbidden + extra)
    assert set(r.id for r in bigger) <= set(r.id for r in retained)


def _single(lemma):
    g = SceneKG()
    g.add_node(lemma)
    return g


# ---------------------------------------------------------------- statistics

def test_stats_by_hand():
    recs = [
        record("c1", "caption", [("eat", "ARG0", "dog")], "x"),
        record("c2", "caption", [("eat", "ARG0", "cat")], "x"),
        record("c3", "caption", [("run", "ARG0", "dog")], "x"),
        record("s1", "story", [("chase", "ARG0", "dog"), ("chase", "ARG1", "cat")], "x"),
        record("s2", "story", [("sleep", "ARG0", "cat")], "x"),
        record("s3", "story", [("eat", "ARG1", "apple")], "x"),
        record("v1", "visual", [("cup", "location", "table")]),
        record("v2", "visual", [("dog", "part", "ear")]),
        record("v3", "visual", [("man", "poss", "hat")]),
        record("v4", "visual", [("cup", "other", "hat")]),
    ]
    stats = corpus_stats(recs)
    per = stats.as_dict()["sources"]
    assert per["caption"] == {"skgs": 3, "concepts": 4}  # eat dog cat run
    assert per["story"] == {"skgs": 3, "concepts": 6}  # chase dog cat sleep eat apple
    assert per["visual"] == {"skgs": 4, "concepts": 6}  # cup table dog ear man hat
    assert stats.total_skgs == 10
    # union: eat dog cat run chase sleep apple cup table ear man hat
    assert stats.total_concepts == 12
    table = stats.table()
    assert "Caption-AMR" in table and table.splitlines()[-1].split() == ["All", "10", "12"]


def test_stats_empty_and_merge():
    empty = corpus_stats([])
    assert empty.total_skgs == 0 and empty.total_concepts == 0
    a = corpus_stats([record("1", "caption", [("eat", "ARG0", "dog")], "x")])
    b = corpus_stats([record("2", "visual", [("dog", "part", "ear")])])
    merged = a.merge(b)
    assert merged.total_skgs == 2 and merged.total_concepts == 3
