import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memvote.kmer_model import (ParseError, PoreModel, ReferenceSequence, encode_reference,
                                load_pore_model, parse_fasta, write_fasta, write_pore_model)

from oracles import ACCGAA_PA, LEVELS_78BP


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_lookup_of_known_kmer(tmp_path):
    p = _write(tmp_path, "m.tsv", "kmer\tlevel_mean\nACCGAA\t99.07\nAAAAAA\t80.0\n")
    m = load_pore_model(p)
    assert m.k == 6
    assert m["ACCGAA"] == ACCGAA_PA
    assert m.incomplete


def test_extra_columns_ignored_and_stdv_read(tmp_path):
    p = _write(tmp_path, "m.tsv", "kmer\tlevel_mean\tlevel_stdv\tsd_mean\nACG\t90\t1.5\t7\n")
    m = load_pore_model(p)
    assert m.level_stdv["ACG"] == 1.5


@pytest.mark.parametrize("body, needle", [
    ("", "empty"),
    ("kmer\tlevel_mean\n", "no rows"),
    ("kmer\tlevel\nACG\t90\n", "header"),
    ("kmer\tlevel_mean\nACG\tninety\n", ":2"),
    ("kmer\tlevel_mean\nACG\t90\nACG\t91\n", "duplicate"),
    ("kmer\tlevel_mean\nACG\t90\nACGT\t91\n", "length"),
    ("kmer\tlevel_mean\nAXG\t90\n", "ACGT"),
    ("kmer\tlevel_mean\nACG\t400\n", "outside"),
])
def test_bad_models_are_rejected(tmp_path, body, needle):
    p = _write(tmp_path, "m.tsv", body)
    with pytest.raises(ParseError, match=needle):
        load_pore_model(p)


def test_model_round_trip(tmp_path, model):
    p = tmp_path / "m.tsv"
    write_pore_model(model, p)
    back = load_pore_model(p)
    assert back.k == model.k and not back.incomplete
    assert all(abs(back[k] - v) < 1e-4 for k, v in model.levels.items())


def test_synthetic_model_pins_reference_kmer(model):
    assert model["ACCGAA"] == ACCGAA_PA
    vals = np.array(list(model.levels.values()))
    assert 60 <= np.median(vals) <= 120


def test_78bp_encodes_to_73_levels(model, rng):
    seq = "".join(rng.choice(list("ACGT"), 78))
    ev = encode_reference(ReferenceSequence("v", seq), model)
    assert len(ev.values) == LEVELS_78BP
    assert list(ev.offsets[:3]) == [0, 1, 2]


def test_first_level_is_first_kmer(model):
    ev = encode_reference(ReferenceSequence("v", "ACCGAAT"), model)
    assert ev.values[0] == ACCGAA_PA
    assert len(ev.values) == 2


def test_encoding_errors(model):
    with pytest.raises(ValueError, match="shorter"):
        encode_reference(ReferenceSequence("s", "ACG"), model)
    with pytest.raises(ValueError, match="non-ACGT"):
        encode_reference(ReferenceSequence("s", "ACGTNACGT"), model)
    partial = PoreModel.from_levels({"ACG": 90.0, "CGT": 95.0})
    with pytest.raises(KeyError, match="GTA.*position 2"):
        encode_reference(ReferenceSequence("s", "ACGTA"), partial)


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="ACGT", min_size=6, max_size=60))
def test_encoding_matches_windowed_lookup(seq):
    from memvote.sim import synthetic_pore_model
    m = synthetic_pore_model()
    ev = encode_reference(ReferenceSequence("s", seq), m)
    assert list(ev.values) == [m[seq[i:i + 6]] for i in range(len(seq) - 5)]


def test_fasta_multi_record_and_wrapping(tmp_path):
    refs = [ReferenceSequence("a", "ACGT" * 30), ReferenceSequence("b", "TTGCA")]
    p = tmp_path / "r.fa"
    write_fasta(refs, p, width=7)
    assert parse_fasta(p) == refs


def test_fasta_errors(tmp_path):
    with pytest.raises(ParseError, match="offset 2"):
        parse_fasta(_write(tmp_path, "a.fa", ">x\nACZT\n"))
    with pytest.raises(ParseError, match="'N' at offset 3"):
        parse_fasta(_write(tmp_path, "b.fa", ">x\nACGNT\n"))
    with pytest.raises(ParseError, match="empty"):
        parse_fasta(_write(tmp_path, "c.fa", ">x\n>y\nACGT\n"))
    with pytest.raises(ParseError, match="before first header"):
        parse_fasta(_write(tmp_path, "d.fa", "ACGT\n"))


def test_fasta_split_policy(tmp_path):
    p = _write(tmp_path, "n.fa", ">x desc\nACGTACNNNGGGCCCATNA\n")
    out = parse_fasta(p, n_policy="split", min_length=3)
    assert [(r.id, r.bases) for r in out] == [("x_0", "ACGTAC"), ("x_1", "GGGCCCAT")]
