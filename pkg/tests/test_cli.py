import hashlib
import json
import shlex
import sys

import pytest

from skgkit import cli


@pytest.fixture
def work(tmp_path, fixtures_dir, monkeypatch):
    for key in list(cli.SETTINGS):
        monkeypatch.delenv(cli.ENV_PREFIX + key.upper(), raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def digest(paths):
    return {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in paths}


def test_help_documents_exit_codes_and_env(capsys):
    with pytest.raises(SystemExit) as exc:
        run("run-pipeline", "--help")
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "exit codes" in out and "SKGKIT_" in out and "--parallelism" in out


def test_usage_errors(work, capsys):
    with pytest.raises(SystemExit) as exc:
        run("no-such-command")
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        run("make-instances", "x", "-o", "y", "--seed", "notanint")
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        run("run-pipeline", "jobs", "-o", "out", "--context-limit", "0")
    assert exc.value.code == cli.EXIT_USAGE


def test_missing_file_and_bad_data(work, fixtures_dir, capsys):
    assert run("stats", work / "missing.jsonl") == cli.EXIT_FILE
    bad = work / "bad.jsonl"
    bad.write_text("{broken\n")
    assert run("stats", bad) == cli.EXIT_DATA
    assert "error" in capsys.readouterr().err


def test_stats_table(work, fixtures_dir, capsys):
    assert run("stats", fixtures_dir / "corpus50.jsonl") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["Knowledge", "source", "#", "SKGs", "#", "Concepts"]
    assert lines[-1].split()[:2] == ["All", "50"]
    assert run("stats", "--json", fixtures_dir / "corpus50.jsonl") == 0
    assert json.loads(capsys.readouterr().out)["total"]["skgs"] == 50


def test_full_flow(work, fixtures_dir, capsys):
    inputs = [fixtures_dir / n for n in ("amr_sample.txt", "vg_sample.jsonl", "task.jsonl", "corpus50.jsonl", "jobs.jsonl")]
    before = digest(inputs)
    assert run("ingest-amr", inputs[0], "-o", "amr.jsonl") == 0
    assert run("map-vg", inputs[1], "-o", "vg.jsonl") == 0
    assert run("make-silver", inputs[2], "-o", "silver.jsonl") == 0
    assert run("filter-overlap", inputs[3], "--forbidden", inputs[2], "-o", "filtered.jsonl") == 0
    assert run("build-index", "filtered.jsonl", "amr.jsonl", "vg.jsonl", "-o", "index.jsonl") == 0
    assert run("run-pipeline", inputs[4], "--index", "index.jsonl", "-o", "results.jsonl") == 0
    results = [json.loads(l) for l in (work / "results.jsonl").read_text().splitlines()]
    assert all(len(r["sentences"]) == len(r["penman_skgs"]) == 4 for r in results)
    assert run("evaluate", "results.jsonl", inputs[2], "-o", "report.json", "--csv", "scores.csv") == 0
    assert "BLEU-4" in capsys.readouterr().out
    assert set(json.loads((work / "report.json").read_text())) >= {"bleu", "explicit_recall"}
    assert len((work / "scores.csv").read_text().splitlines()) == 13
    assert digest(inputs) == before
    assert not list(work.glob(".*"))  # no temp files left behind


def test_run_pipeline_is_deterministic(work, fixtures_dir):
    run("build-index", fixtures_dir / "corpus50.jsonl", "-o", "index.jsonl")
    for n in (1, 8):
        assert run("run-pipeline", fixtures_dir / "jobs.jsonl", "--index", "index.jsonl",
                   "--parallelism", n, "-o", f"r{n}.jsonl") == 0
    assert (work / "r1.jsonl").read_bytes() == (work / "r8.jsonl").read_bytes()


def test_make_instances_seed_and_precedence(work, fixtures_dir, monkeypatch):
    corpus = fixtures_dir / "corpus50.jsonl"
    run("make-instances", corpus, "--kind", "imagination", "--seed", "4", "-o", "a.jsonl")
    run("make-instances", corpus, "--kind", "imagination", "--seed", "4", "-o", "b.jsonl")
    run("make-instances", corpus, "--kind", "imagination", "--seed", "5", "-o", "c.jsonl")
    a, b, c = ((work / f"{x}.jsonl").read_bytes() for x in "abc")
    assert a == b != c
    # env beats config, flag beats env
    (work / "cfg.json").write_text(json.dumps({"seed": 5}))
    run("make-instances", corpus, "--kind", "imagination", "--config", "cfg.json", "-o", "d.jsonl")
    assert (work / "d.jsonl").read_bytes() == c
    monkeypatch.setenv("SKGKIT_SEED", "4")
    run("make-instances", corpus, "--kind", "imagination", "--config", "cfg.json", "-o", "e.jsonl")
    assert (work / "e.jsonl").read_bytes() == a
    run("make-instances", corpus, "--kind", "imagination", "--config", "cfg.json", "--seed", "5", "-o", "f.jsonl")
    assert (work / "f.jsonl").read_bytes() == c


def test_make_instances_kinds(work, fixtures_dir):
    corpus = fixtures_dir / "corpus50.jsonl"
    run("build-index", corpus, "-o", "index.jsonl")
    assert run("make-instances", corpus, "--epochs", "2", "--imagine-index", "index.jsonl", "-o", "i.jsonl") == 0
    kinds = [json.loads(l)["skg_origin"] for l in (work / "i.jsonl").read_text().splitlines()]
    with_sentence = 50 - 12  # visual records carry no sentence
    assert kinds.count("none") == 100
    assert kinds.count("silver") == kinds.count("generated") == with_sentence
    with pytest.raises(SystemExit) as exc:
        run("make-instances", corpus, "--dropout-rate", "1.5", "-o", "bad.jsonl")
    assert exc.value.code == cli.EXIT_USAGE
    assert not (work / "bad.jsonl").exists()


def test_imagine_and_verbalize(work, fixtures_dir, capsys):
    run("build-index", fixtures_dir / "corpus50.jsonl", "-o", "index.jsonl")
    capsys.readouterr()
    assert run("imagine", "--concepts", "dog,frisbee", "--index", "index.jsonl") == 0
    line = json.loads(capsys.readouterr().out)
    assert "frisbee" in line["penman"]
    assert run("verbalize", "--penman", "(z0 / hold :ARG0 (z1 / man) :ARG1 (z2 / bottle))") == 0
    assert json.loads(capsys.readouterr().out)["text"] == "A man holds a bottle."
    assert run("verbalize", "--assemble", "--concepts", "dog", "--penman", "(z0 / dog)") == 0
    assert json.loads(capsys.readouterr().out)["input"] == "none <sep> dog <sep> (z0 / dog)"
    with pytest.raises(SystemExit):
        run("imagine", "--concepts", "dog")  # no backend given


def test_backend_failures(work, fixtures_dir):
    mock = shlex.join([sys.executable, "-m", "skgkit.mock_backend", "--error", "down"])
    assert run("imagine", "--concepts", "dog", "--imagine-endpoint", f"stdio:{mock}") == cli.EXIT_BACKEND
    # every job fails mid-way: the partial results are still written
    code = run("run-pipeline", fixtures_dir / "jobs.jsonl", "--imagine-endpoint", f"stdio:{mock}", "-o", "r.jsonl")
    assert code == cli.EXIT_PARTIAL
    assert all("error" in json.loads(l) for l in (work / "r.jsonl").read_text().splitlines())


def test_external_backends_in_pipeline(work, fixtures_dir):
    run("build-index", fixtures_dir / "corpus50.jsonl", "-o", "index.jsonl")
    server = shlex.join([sys.executable, "-m", "skgkit.mock_backend", "--index", "index.jsonl"])
    assert run("run-pipeline", fixtures_dir / "jobs.jsonl", "--imagine-endpoint", f"stdio:{server}",
               "--verbalize-endpoint", f"stdio:{server}", "-o", "ext.jsonl") == 0
    assert run("run-pipeline", fixtures_dir / "jobs.jsonl", "--index", "index.jsonl", "-o", "local.jsonl") == 0
    assert (work / "ext.jsonl").read_bytes() == (work / "local.jsonl").read_bytes()


def test_failed_write_leaves_previous_output(work, fixtures_dir):
    out = work / "out.jsonl"
    out.write_text("previous\n")
    bad = work / "bad.jsonl"
    bad.write_text('{"id": "x", "source": "caption", "penman": "(z0 / dog"}\n')
    assert run("build-index", fixtures_dir / "corpus50.jsonl", bad, "-o", out) == cli.EXIT_DATA
    assert out.read_text() == "previous\n"


def test_atomic_output_keeps_old_file_on_error(work):
    target = work / "t.txt"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with cli.atomic_output(target) as fh:
            fh.write("half")
            raise RuntimeError("boom")
    assert target.read_text() == "old"
    assert sorted(p.name for p in work.iterdir()) == ["t.txt"]
