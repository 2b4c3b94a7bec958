import json

import pytest

from cograph.cli import main
from cograph.codec import Codec
from cograph.metrics import parse_table


def test_train_codec_one_epoch(tmp_path, capsys):
    corpus = tmp_path / "corpus.json"
    corpus.write_text(json.dumps({"n_categories": 4, "per_category": 8}))
    out_a, out_b = tmp_path / "a.bin", tmp_path / "b.bin"
    for out in (out_a, out_b):
        rc = main(["train-codec", "--corpus", str(corpus), "--epochs", "1", "--batch", "8",
                   "--seed", "3", "--out", str(out)])
        assert rc == 0
    assert "trained 1 epoch(s)" in capsys.readouterr().out
    assert out_a.read_bytes() == out_b.read_bytes()
    Codec.load(out_a)


def test_bad_corpus_config(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert main(["train-codec", "--corpus", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["train-codec", "--epochs", "0", "--out", str(tmp_path / "x")]) == 2


def test_missing_codec(tmp_path, capsys):
    rc = main(["run", "--codec", str(tmp_path / "none.bin"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "CodecNotFound" in capsys.readouterr().err


def test_bad_scenario(tmp_path, quick_codec_file):
    bad = tmp_path / "s.json"
    bad.write_text("{}")
    assert main(["run", "--scenario", str(bad), "--codec", str(quick_codec_file),
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--scenario", "missing.json", "--codec", str(quick_codec_file),
                 "--out", str(tmp_path / "o")]) == 2


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, quick_codec_file):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--scenario", "shared_room.json", "--codec", str(quick_codec_file),
                 "--out", str(out), "--seed", "7", "--both-modes"]) == 0
    return out


def test_run_artifacts(run_dir):
    names = {p.name for p in run_dir.iterdir()}
    for mode in ("compressed", "raw-512"):
        assert {f"merged_graph_{mode}.txt", f"channel_{mode}.csv",
                f"merge_report_{mode}.json"} <= names
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert set(metrics["runs"]) == {"compressed", "raw-512"}
    assert 0.94 <= metrics["reduction"] <= 0.97
    report = json.loads((run_dir / "merge_report_compressed.json").read_text())
    ev = report["events"][0]
    assert {"t", "t_true", "t_error", "candidates", "fused_pairs"} <= set(ev)
    rows = parse_table((run_dir / "table.txt").read_text())
    for row in rows:
        m = metrics["runs"]["compressed" if row["dimension"] == 3 else "raw-512"]
        assert row["kb"] == round(m["bytes"] / 1000, 2)
        assert row["t_error"] == round(m["t_error"], 3)


def test_run_is_repeatable(run_dir, tmp_path, quick_codec_file):
    out = tmp_path / "again"
    assert main(["run", "--scenario", "shared_room.json", "--codec", str(quick_codec_file),
                 "--out", str(out), "--seed", "7", "--both-modes"]) == 0
    assert (out / "metrics.json").read_bytes() == (run_dir / "metrics.json").read_bytes()


def test_query_and_metrics_commands(run_dir, capsys):
    assert main(["query", "--graph", str(run_dir / "merged_graph_compressed.txt"),
                 "--text", "lamp", "--k", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[0].startswith("1\t")
    assert float(lines[0].split("\t")[-1]) > 0.9
    assert main(["metrics", "--run-dir", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "R_obj=1.000" in out and "Data(KB)" in out


def test_query_errors(tmp_path):
    assert main(["query", "--graph", str(tmp_path / "none.txt"), "--text", "x"]) == 2
    empty = tmp_path / "g.txt"
    empty.write_text("cograph 0\n")
    assert main(["query", "--graph", str(empty), "--text", "chair"]) == 3
