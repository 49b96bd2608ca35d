import numpy as np

from memvote.aligner import AlignConfig, build_index
from memvote.experiments import (SweepRow, best_row, detection_sweep, is_interior, mapping_sweep,
                                 read_mapping, read_profiles, top3_tally, write_mapping, write_sweep)
from memvote.kmer_model import ReferenceSequence
from memvote.sim import SimParams, random_genome, simulate_community


def _row(t, s, f1):
    return SweepRow(t, s, 0.0, 0.0, f1, 0, 0, 0)


def test_best_row_prefers_centre_of_plateau():
    rows = [_row(t, s, 1.0 if (t, s) in {(0, 1), (1, 1), (2, 1)} else 0.5) for t in range(4) for s in (1, 2, 3)]
    assert (best_row(rows).cam_threshold, best_row(rows).second) == (1, 1)
    assert not is_interior(rows, best_row(rows))
    assert is_interior(rows, _row(2, 2, 0))


def test_grid_cardinality_and_files(model, tmp_path):
    virus = ReferenceSequence("virus", random_genome(78, seed=8).bases)
    human = random_genome(20_000, seed=9, name="human")
    com = simulate_community([(virus, 20, SimParams()), (human, 20, SimParams(read_length=78))], model, 2)
    idx = build_index([virus], model)
    prof = read_profiles(idx, com.reads, AlignConfig(), max_threshold=32)
    truths = [{"species": t.species, "start": t.start, "length": t.length} for t in com.truths]
    rows = detection_sweep(prof, truths, "virus", range(33), range(1, 16))
    assert len(rows) == 33 * 15
    assert [(r.cam_threshold, r.second) for r in rows[:2]] == [(0, 1), (0, 2)]
    write_sweep(rows, tmp_path / "s.tsv", header=["x"])
    lines = (tmp_path / "s.tsv").read_text().splitlines()
    assert lines[0] == "#x" and lines[1].startswith("#cam_threshold\tvotes_min") and len(lines) == 2 + 495
    mrows = mapping_sweep(prof, truths, ["virus"], [4, 16], [1, 7])
    assert len(mrows) == 4


def test_threads_do_not_change_results(model):
    g = random_genome(3000, seed=1, name="g")
    com = simulate_community([(g, 12, SimParams(read_length=300))], model, 5)
    idx = build_index([g], model)
    a = read_profiles(idx, com.reads, AlignConfig(), max_threshold=16)
    b = read_profiles(idx, com.reads, AlignConfig(), max_threshold=16, threads=3)
    assert all(np.array_equal(x.cum[0], y.cum[0]) for x, y in zip(a, b))
    for p in a:
        assert top3_tally(p, 9).top(3) == p.tally(9).top(3)


def test_mapping_tsv_round_trip(tmp_path):
    from memvote.aligner import MappingResult as M
    res = [M("a", "mapped", "g", 3, None, 9, 2, 1), M("b", "boundary", "g", 4, 5, 6, 5, 1), M("c", "unmapped")]
    write_mapping(res, tmp_path / "m.tsv")
    text = (tmp_path / "m.tsv").read_text().splitlines()
    assert text[2] == "b\tboundary\tg\t4-5\t6\t5\t1" and text[3] == "c\tunmapped\t*\t*\t0\t0\t0"
    assert read_mapping(tmp_path / "m.tsv") == res


def test_boundary_errors_counts_extra_and_missing_cuts():
    from memvote.events import EventVector
    from memvote.experiments import boundary_errors
    ev = EventVector(values=np.zeros(4), boundaries=np.array([0, 10, 22, 40]))
    # 10 matches 11, 22 is an extra cut, 40 matches 38; 60 was never detected
    assert boundary_errors(ev, [0, 11, 38, 60], tol=3) == (1, 1, 3)
    assert boundary_errors(EventVector(np.zeros(1), np.array([0])), [0, 5, 9]) == (0, 2, 2)
