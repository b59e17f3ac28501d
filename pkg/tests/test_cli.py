import io
import json

import numpy as np
import pytest

from rsmatch import _kernels
from rsmatch.cli import main
from rsmatch.fileio import read_embeddings, read_scores

EXAMPLE = __import__("pathlib").Path(__file__).resolve().parents[1] / "data" / "example.jsonl"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def gallery_file(tmp_path):
    path = tmp_path / "g.rsmf"
    code, out, _ = run("synth", "-o", path, "--classes", 12, "--per-session", 3, "--dim", 16,
                       "--outlier-rate", 0.1, "--seed", 5)
    assert code == 0 and "72 real records" in out
    return path


def test_synth_is_deterministic(tmp_path, gallery_file):
    again = tmp_path / "again.rsmf"
    run("synth", "-o", again, "--classes", 12, "--per-session", 3, "--dim", 16, "--outlier-rate", 0.1,
        "--seed", 5)
    assert again.read_bytes() == gallery_file.read_bytes()


def test_synth_binary_from_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"out": str(tmp_path / "res"),
                               "synth": {"num_classes": 4, "payload_kind": "binary", "bits": 20}}))
    code, out, err = run("synth", "--config", cfg)
    assert code == 0, err
    g = read_embeddings(tmp_path / "res" / "gallery.rsmf")
    assert g.kind.value == "binary" and g.dim == 20 and g.class_count == 4


def test_ingest(tmp_path):
    code, out, err = run("ingest", EXAMPLE, "-o", tmp_path / "ex.rsmf")
    assert code == 0, err
    g = read_embeddings(tmp_path / "ex.rsmf")
    assert len(g) == 12 and g.class_count == 3


def test_score_two_ids(gallery_file):
    g = read_embeddings(gallery_file)
    a, b = g.ids[0], g.ids[40]
    code, out, err = run("score", gallery_file, a, b, "--rsm", "--m-refs", 10)
    assert code == 0, err
    header, row = out.strip().split("\n")
    assert header.split("\t") == ["id_a", "id_b", "score", "direct", "relative", "m_used"]
    fields = row.split("\t")
    assert fields[:2] == [a, b] and fields[5] == "10"
    score, direct, rel = map(float, fields[2:5])
    assert score == pytest.approx(direct + rel, abs=1e-12)


def test_score_plain_metric_leaves_relative_blank(gallery_file):
    g = read_embeddings(gallery_file)
    code, out, _ = run("score", gallery_file, g.ids[1], g.ids[2], "--metric", "euclidean")
    row = out.strip().split("\n")[1].split("\t")
    assert code == 0 and row[4] == "" and row[5] == "0"


def test_score_pairs_file(tmp_path, gallery_file):
    g = read_embeddings(gallery_file)
    pairs = tmp_path / "pairs.txt"
    pairs.write_text(f"# comment\n{g.ids[0]} {g.ids[1]}\n\n{g.ids[2]} {g.ids[3]}\n")
    code, out, _ = run("score", gallery_file, "--pairs", pairs)
    assert code == 0 and len(out.strip().split("\n")) == 3


def test_score_self_pair_rejected(gallery_file):
    g = read_embeddings(gallery_file)
    code, out, err = run("score", gallery_file, g.ids[0], g.ids[0])
    assert code == 1
    assert err.startswith("error: InvalidPair:") and err.count("\n") == 1


def test_score_unknown_id(gallery_file):
    code, _, err = run("score", gallery_file, "nope", "also-nope")
    assert code == 2 and "unknown record id" in err


def test_unknown_flag_is_usage_error():
    code, _, err = run("eval", "--frobnicate")
    assert code == 2 and err.startswith("error: UsageError:")


def test_missing_file_is_io_error(tmp_path):
    code, _, err = run("score", tmp_path / "missing.rsmf", "a", "b")
    assert code == 1 and err.startswith("error: IOError:")


def test_bad_magic_reported(tmp_path):
    path = tmp_path / "bad.rsmf"
    path.write_bytes(b"XXXX" + bytes(30))
    code, _, err = run("eval", path, "--out", tmp_path / "o")
    assert code == 1 and err.startswith("error: BadMagic:")


def _eval(gallery, out, *extra):
    code, stdout, err = run("eval", gallery, "--out", out, "--m-refs", 8, *extra)
    assert code == 0, err
    return stdout


def test_eval_outputs(tmp_path, gallery_file):
    out = tmp_path / "res"
    stdout = _eval(gallery_file, out, "--save-scores")
    assert "pairs: 108 genuine, 1188 impostor" in stdout
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([
        "comparison.json", "trouble_pairs.tsv", "report_baseline.json", "report_candidate.json",
        "hist_baseline_genuine.tsv", "hist_baseline_impostor.tsv",
        "hist_candidate_genuine.tsv", "hist_candidate_impostor.tsv",
        "scores_baseline.tsv", "scores_candidate.tsv",
    ])
    report = json.loads((out / "report_candidate.json").read_text())
    assert report["role"] == "candidate" and report["config"]["use_rsm"]
    assert report["pairs"] == {"genuine": 108, "impostor": 1188}
    assert "workers" not in report["run"]["eval"] and "out" not in report["run"]
    scores = read_scores(out / "scores_baseline.tsv")
    assert scores.genuine.size == 108
    trouble = (out / "trouble_pairs.tsv").read_text().splitlines()
    assert trouble[0] == "id_a\tid_b\terror_kind\tbaseline_score\tcandidate_score"


def test_eval_reports_byte_identical(tmp_path, gallery_file):
    _eval(gallery_file, tmp_path / "a")
    _eval(gallery_file, tmp_path / "b", "--workers", 3, "--chunk-size", 100)
    for name in ("report_baseline.json", "report_candidate.json", "comparison.json", "trouble_pairs.tsv",
                 "hist_candidate_impostor.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_eval_streamed_matches_exact_counts(tmp_path, gallery_file):
    _eval(gallery_file, tmp_path / "e", "--mode", "exact")
    _eval(gallery_file, tmp_path / "s", "--mode", "streamed")
    e = json.loads((tmp_path / "e" / "report_baseline.json").read_text())
    s = json.loads((tmp_path / "s" / "report_baseline.json").read_text())
    assert e["histogram"] == s["histogram"]


def test_save_scores_needs_exact(tmp_path, gallery_file):
    code, _, err = run("eval", gallery_file, "--out", tmp_path / "o", "--mode", "streamed", "--save-scores")
    assert code == 2 and "exact" in err


def test_eval_requires_out(gallery_file):
    code, _, err = run("eval", gallery_file)
    assert code == 2


def test_eval_from_config(tmp_path, gallery_file):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"input": str(gallery_file), "out": str(tmp_path / "cfgout"),
                               "protocol": "all-pairs", "candidate": {"use_rsm": True, "m_refs": 5}}))
    code, out, err = run("eval", "--config", cfg)
    assert code == 0, err
    report = json.loads((tmp_path / "cfgout" / "report_candidate.json").read_text())
    assert report["protocol"] == "all-pairs" and report["references"]["m"] == 5 or report["config"]["m_refs"] == 5


def test_hist(tmp_path):
    scores = tmp_path / "s.tsv"
    scores.write_text("kind\tscore\ngenuine\t0.05\ngenuine\t0.3\nimpostor\t0.7\nimpostor\t1.4\n")
    code, out, err = run("hist", scores, "--out", tmp_path / "h", "--bin-width", 0.1, "--range", 0, 1,
                         "--clamp")
    assert code == 0, err
    lines = (tmp_path / "h" / "hist_genuine.tsv").read_text().splitlines()
    counts = [int(line.split("\t")[-1]) for line in lines[1:]]
    assert len(counts) == 10 and counts[0] == 1 and counts[3] == 1
    imp = [int(line.split("\t")[-1]) for line in (tmp_path / "h" / "hist_impostor.tsv").read_text().splitlines()[1:]]
    assert imp[7] == 1 and imp[9] == 1


def test_hist_out_of_range_without_clamp(tmp_path):
    scores = tmp_path / "s.tsv"
    scores.write_text("kind\tscore\ngenuine\t1.4\n")
    code, _, err = run("hist", scores, "--out", tmp_path / "h", "--range", 0, 1)
    assert code == 1 and err.startswith("error: ")


def test_bench_small():
    code, out, err = run("bench", "--n", 60, "--pairs", 500, "--repeat", 1, "--m-refs", 5)
    assert code == 0, err
    rows = [line for line in out.splitlines()[2:] if line.strip()]
    assert len(rows) == 5 * len(_kernels.AVAILABLE)
    assert all(row.rstrip().endswith("yes") for row in rows)


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "rsmatch", "score"], capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.startswith("error: UsageError:")


@pytest.mark.slow
def test_tongji_shaped_eval(tmp_path):
    path = tmp_path / "t.rsmf"
    code, _, err = run("synth", "-o", path, "--classes", 600, "--per-session", 10, "--kind", "binary",
                       "--bits", 128, "--outlier-rate", 0.01, "--outlier-spread", 0.5)
    assert code == 0, err
    code, out, err = run("eval", path, "--out", tmp_path / "o", "--mode", "streamed", "--m-refs", 30)
    assert code == 0, err
    assert "pairs: 60000 genuine, 35940000 impostor" in out
    assert np.isfinite(json.loads((tmp_path / "o" / "report_candidate.json").read_text())["eer"])


def test_eval_binary_defaults_to_hamming(tmp_path):
    path = tmp_path / "b.rsmf"
    run("synth", "-o", path, "--classes", 6, "--per-session", 2, "--kind", "binary", "--bits", 32)
    code, out, err = run("eval", path, "--out", tmp_path / "o", "--m-refs", 4)
    assert code == 0, err
    report = json.loads((tmp_path / "o" / "report_candidate.json").read_text())
    assert report["config"]["base_metric"] == "hamming"
    code, _, err = run("eval", path, "--out", tmp_path / "o2", "--metric", "cosine")
    assert code == 1 and err.startswith("error: IncompatibleMetric:")
