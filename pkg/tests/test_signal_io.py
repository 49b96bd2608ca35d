import numpy as np
import pytest

from memvote.events import RawSignal
from memvote.signal_io import FormatError, read_reads, write_reads


def _reads(rng):
    return [RawSignal(f"r{i}", np.round(rng.normal(90, 10, 50 + i), 3), 4000.0) for i in range(4)]


@pytest.mark.parametrize("name", ["reads.txt", "reads.f32"])
def test_round_trip(tmp_path, rng, name):
    reads = _reads(rng)
    write_reads(reads, tmp_path / name)
    back = read_reads(tmp_path / name)
    assert [r.read_id for r in back] == [r.read_id for r in reads]
    tol = 1e-9 if name.endswith("txt") else 1e-4
    assert all(np.allclose(a.samples, b.samples, atol=tol) for a, b in zip(reads, back))


def test_binary_layout(tmp_path, rng):
    reads = _reads(rng)
    write_reads(reads, tmp_path / "x.f32")
    raw = (tmp_path / "x.f32").read_bytes()
    assert len(raw) == 4 * sum(len(r.samples) for r in reads)
    first = np.frombuffer(raw[:4], "<f4")[0]
    assert first == np.float32(reads[0].samples[0])
    side = (tmp_path / "x.f32.tsv").read_text().splitlines()
    assert side[0] == "#memvote-raw-bin v1"
    assert side[3].split("\t") == ["r1", "4000", "50", "51"]


def test_empty_and_bad_files(tmp_path):
    (tmp_path / "e.txt").write_text("")
    assert read_reads(tmp_path / "e.txt") == []
    (tmp_path / "b.txt").write_text("hello\n")
    with pytest.raises(FormatError, match="header"):
        read_reads(tmp_path / "b.txt")
    (tmp_path / "c.txt").write_text("#memvote-raw v1\nr1\t4000\t1,2,x\n")
    with pytest.raises(FormatError, match=":2"):
        read_reads(tmp_path / "c.txt")
    (tmp_path / "d.f32").write_bytes(b"\0" * 8)
    with pytest.raises(FormatError, match="sidecar"):
        read_reads(tmp_path / "d.f32")
    (tmp_path / "d.f32.tsv").write_text("#memvote-raw-bin v1\nr\t4000\t0\t5\n")
    with pytest.raises(FormatError, match="beyond"):
        read_reads(tmp_path / "d.f32")


def test_truth_attached(tmp_path, rng):
    write_reads(_reads(rng), tmp_path / "r.txt")
    back = read_reads(tmp_path / "r.txt", {"r2": {"species": "v"}})
    assert back[2].truth == {"species": "v"} and back[0].truth == {}
