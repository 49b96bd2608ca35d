import struct

import pytest

from memvote.cli import main
from memvote.experiments import virus_fragment
from memvote.kmer_model import write_fasta, write_pore_model
from memvote.sim import random_genome


@pytest.fixture(scope="module")
def inputs(tmp_path_factory, model):
    d = tmp_path_factory.mktemp("cli")
    write_pore_model(model, d / "model.tsv")
    virus = virus_fragment(random_genome(5000, seed=0), 78, seed=1)
    write_fasta([virus], d / "virus.fa")
    write_fasta([random_genome(20_000, seed=2, name="human")], d / "human.fa")
    write_fasta([virus_fragment(random_genome(4000, seed=10 + i), 78, seed=i, name=f"sp{i}") for i in range(3)],
                d / "three.fa")
    assert main(["simulate", "--reference", str(d / "virus.fa"), str(d / "human.fa"), "--n-reads", "40", "40",
                 "--read-length", "0", "78", "--model", str(d / "model.tsv"), "--out", str(d / "reads.f32"),
                 "--seed-simulator", "5"]) == 0
    assert main(["index", "--reference", str(d / "virus.fa"), "--model", str(d / "model.tsv"),
                 "--out", str(d / "virus.idx")]) == 0
    return d


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_index_shape_and_determinism(inputs, capsys):
    d = inputs
    code, out, _ = _run(capsys, "index", "--reference", d / "virus.fa", "--model", d / "model.tsv",
                        "--out", d / "again.idx")
    assert code == 0 and "#virus\t64\t1" in out
    assert (d / "again.idx").read_bytes() == (d / "virus.idx").read_bytes()


def test_missing_model_is_input_error(inputs, capsys):
    code, _, err = _run(capsys, "index", "--reference", inputs / "virus.fa", "--model", inputs / "nope.tsv",
                        "--out", inputs / "x.idx")
    assert code == 2 and "nope.tsv" in err


def test_detect_reports_f1_and_is_deterministic(inputs, capsys):
    d = inputs
    args = ["detect", "--index", d / "virus.idx", "--reads", d / "reads.f32", "--truth",
            d / "reads.f32.manifest.tsv", "--cam-threshold", 16, "--votes-min", 7]
    code, out, _ = _run(capsys, *args, "--out", d / "det1.tsv")
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "#seeds simulator=0 crossbar=0 cam=0 read_noise=0"
    f1 = float(lines[lines.index("#recall\tprecision\tf1\ttp\tfp\tfn") + 1].split("\t")[2])
    assert f1 > 0.8
    _run(capsys, *args, "--out", d / "det2.tsv")
    assert (d / "det1.tsv").read_bytes() == (d / "det2.tsv").read_bytes()
    body = (d / "det1.tsv").read_text().splitlines()
    assert body[0].startswith("#") and len([x for x in body if not x.startswith("#")]) == 80


def test_empty_reads(inputs, capsys):
    d = inputs
    (d / "empty.txt").write_text("")
    (d / "empty.tsv").write_text("")
    code, out, _ = _run(capsys, "map", "--index", d / "virus.idx", "--reads", d / "empty.txt",
                        "--truth", d / "empty.tsv", "--out", d / "empty_out.tsv")
    assert code == 0
    assert "#0.000000\t0.000000\t0.000000\t0\t0\t0" in out
    assert all(x.startswith("#") for x in (d / "empty_out.tsv").read_text().splitlines())


def test_abundance_confusion_shape(inputs, capsys):
    d = inputs
    assert main(["simulate", "--reference", str(d / "three.fa"), "--n-reads", "30", "--model", str(d / "model.tsv"),
                 "--out", str(d / "three.txt")]) == 0
    assert main(["index", "--reference", str(d / "three.fa"), "--model", str(d / "model.tsv"),
                 "--out", str(d / "three.idx")]) == 0
    capsys.readouterr()
    code, out, _ = _run(capsys, "abundance", "--index", d / "three.idx", "--reads", d / "three.txt",
                        "--truth", d / "three.txt.manifest.tsv", "--cam-threshold", 16, "--out", d / "ab.tsv")
    assert code == 0
    lines = out.splitlines()
    head = lines.index("#confusion\tsp0\tsp1\tsp2\tunclassified")
    matrix = [ln.split("\t")[1:] for ln in lines[head + 1:head + 4]]
    assert len(matrix) == 3 and all(len(r) == 4 for r in matrix)
    assert sum(int(x) for r in matrix for x in r) == 30


def test_sweep_grid(inputs, capsys):
    d = inputs
    code, out, _ = _run(capsys, "sweep", "--mode", "detect", "--index", d / "virus.idx", "--reads", d / "reads.f32",
                        "--truth", d / "reads.f32.manifest.tsv", "--out", d / "sw.tsv")
    assert code == 0 and "#grid_points 495" in out
    rows = [x for x in (d / "sw.tsv").read_text().splitlines() if not x.startswith("#")]
    assert len(rows) == 33 * 15
    code, out, _ = _run(capsys, "sweep", "--mode", "detect", "--index", d / "virus.idx", "--reads", d / "reads.f32",
                        "--truth", d / "reads.f32.manifest.tsv", "--thresholds", "8:10",
                        "--samples", "500,4000", "--out", d / "ss.tsv")
    assert code == 0 and "#grid_points 6" in out
    assert "max_samples" in (d / "ss.tsv").read_text()


def test_map_then_eval(inputs, capsys):
    d = inputs
    assert main(["map", "--index", str(d / "virus.idx"), "--reads", str(d / "reads.f32"),
                 "--out", str(d / "map.tsv"), "--votes-min", "7", "--cam-threshold", "16"]) == 0
    capsys.readouterr()
    code, out, _ = _run(capsys, "eval", "--results", d / "map.tsv", "--truth", d / "reads.f32.manifest.tsv",
                        "--index", d / "virus.idx")
    assert code == 0 and "#recall\tprecision\tf1" in out


def test_config_file_and_override(inputs, capsys, tmp_path):
    d = inputs
    cfg = tmp_path / "run.toml"
    cfg.write_text('cam_threshold = 16\nvotes_min = 7\nbackend = "analog"\nseed_read_noise = 9\n')
    code, out, _ = _run(capsys, "detect", "--config", cfg, "--index", d / "virus.idx", "--reads", d / "reads.f32",
                        "--votes-min", 5, "--out", tmp_path / "o.tsv")
    assert code == 0
    assert "#backend analog cam_threshold 16 votes_min 5" in out
    assert "read_noise=9" in out


@pytest.mark.parametrize("text, needle", [
    ("bogus = 1\n", "unknown config key"),
    ("votes_min = \"three\"\n", "wrong type"),
    ("[align]\nm = 10\n", "flat"),
    ("cam_threshold = 500\n", "cam_threshold"),
])
def test_bad_config(inputs, capsys, tmp_path, text, needle):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    code, _, err = _run(capsys, "detect", "--config", cfg, "--index", inputs / "virus.idx",
                        "--reads", inputs / "reads.f32", "--out", tmp_path / "o.tsv")
    assert code == 2 and needle in err


def test_version_and_format_errors(inputs, capsys, tmp_path):
    data = bytearray((inputs / "virus.idx").read_bytes())
    data[4:6] = struct.pack("<H", 7)
    (tmp_path / "old.idx").write_bytes(bytes(data))
    code, _, err = _run(capsys, "map", "--index", tmp_path / "old.idx", "--reads", inputs / "reads.f32",
                        "--out", tmp_path / "o.tsv")
    assert code == 3 and "version" in err
    (tmp_path / "bad.txt").write_text("not reads\n")
    code, _, _ = _run(capsys, "map", "--index", inputs / "virus.idx", "--reads", tmp_path / "bad.txt",
                      "--out", tmp_path / "o.tsv")
    assert code == 2
    code, _, _ = _run(capsys, "map", "--index", inputs / "model.tsv", "--reads", inputs / "reads.f32",
                      "--out", tmp_path / "o.tsv")
    assert code == 2
