import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memvote.cam import (DeviceModel, build_cam, cam_from_bytes, cam_to_bytes, match_levels, match_pairs,
                         row_current, row_currents, search)

from oracles import MISMATCH_UA, hamming_direct, row_current_direct

IDEAL = DeviceModel(variation_stdv=0.0)


def _bits(rng, r, b=128):
    return rng.random((r, b)) < 0.5


def test_noiseless_current_counts_mismatches(rng):
    stored = _bits(rng, 1)
    cam = build_cam(stored, dev=IDEAL)
    for d in (0, 1, 5, 17, 128):
        q = stored[0].copy()
        q[:d] = ~q[:d]
        assert row_current(cam, 0, q) == pytest.approx(d * MISMATCH_UA)


def test_row_current_matches_direct_sum(rng):
    cam = build_cam(_bits(rng, 5), dev=DeviceModel(variation_stdv=2.5), rng_seed=3)
    q = _bits(rng, 1)[0]
    for r in range(5):
        want = row_current_direct(cam.conductances[r], q, 0.2)
        assert row_current(cam, r, q) == pytest.approx(want, rel=1e-9)
        assert row_currents(cam, q[None])[0, r] == pytest.approx(want, rel=1e-6)


def test_row_current_bounds(rng):
    cam = build_cam(_bits(rng, 2), dev=IDEAL)
    with pytest.raises(IndexError):
        row_current(cam, 2, np.zeros(128, bool))
    with pytest.raises(ValueError):
        row_current(cam, 0, np.zeros(64, bool))


def test_programming_stays_within_tolerance(rng):
    cam = build_cam(_bits(rng, 64), dev=DeviceModel(variation_stdv=4.0), rng_seed=1)
    g = cam.conductances.astype(float)
    first, second = g[:, 0::2], g[:, 1::2]
    on = np.where(cam.stored_bits, first, second)
    off = np.where(cam.stored_bits, second, first)
    assert np.all(np.abs(on - 150) <= 5 + 1e-4)
    assert np.all((off >= 0) & (off <= 5 + 1e-4))


def test_outliers_are_flagged(rng):
    cam = build_cam(_bits(rng, 50), dev=DeviceModel(outlier_rate=0.05), rng_seed=2)
    frac = cam.outliers.mean()
    assert 0.03 < frac < 0.07
    assert np.all(cam.conductances[cam.outliers] <= 150)


def test_analog_equals_digital_without_variation():
    r = np.random.default_rng(0)
    for _ in range(1000):
        rows = r.integers(1, 6)
        stored = _bits(r, rows)
        q = r.random(128) < 0.5
        t = int(r.integers(0, 129))
        cam = build_cam(stored, dev=IDEAL, rng_seed=int(r.integers(1 << 30)))
        assert np.array_equal(search(cam, q, t, "analog"), search(cam, q, t, "digital"))


def test_digital_search_matches_direct_hamming(rng):
    stored = _bits(rng, 30)
    cam = build_cam(stored)
    q = _bits(rng, 1)[0]
    for t in (0, 40, 64, 90):
        want = [i for i in range(30) if hamming_direct(stored[i], q) <= t]
        assert list(search(cam, q, t, "digital")) == want


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["analog", "digital"]))
def test_match_sets_grow_with_threshold(seed, backend):
    r = np.random.default_rng(seed)
    cam = build_cam(_bits(r, 20), dev=DeviceModel(variation_stdv=5.0), rng_seed=seed)
    q = r.random(128) < 0.5
    prev = set()
    for t in range(0, 129, 8):
        cur = set(search(cam, q, t, backend).tolist())
        assert prev <= cur
        prev = cur


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["analog", "digital"]), st.integers(0, 128))
def test_levels_agree_with_search(seed, backend, t):
    r = np.random.default_rng(seed)
    cam = build_cam(_bits(r, 12), dev=DeviceModel(variation_stdv=2.5), rng_seed=seed)
    q = _bits(r, 3)
    lv = match_levels(cam, q, backend)
    qi, ri, plv = match_pairs(cam, q, t, backend)
    for i in range(3):
        got = set(search(cam, q[i], t, backend).tolist())
        assert got == set(np.flatnonzero(lv[i] <= t).tolist())
        assert got == set(ri[qi == i].tolist())
    assert np.array_equal(plv, lv[qi, ri])


def test_serialization_round_trip(rng):
    cam = build_cam(_bits(rng, 9), np.arange(9) // 4, DeviceModel(outlier_rate=0.1), rng_seed=5)
    back = cam_from_bytes(cam_to_bytes(cam))
    assert back == cam
    assert np.array_equal(back.outliers, cam.outliers)
    with pytest.raises(ValueError):
        cam_from_bytes(cam_to_bytes(cam)[:-10])


def test_device_validation():
    with pytest.raises(ValueError):
        DeviceModel(g_on_target=0)
    with pytest.raises(ValueError):
        DeviceModel(outlier_rate=2)
    with pytest.raises(ValueError):
        build_cam(np.zeros((3, 8), bool), buckets=[0, 1])


def test_expected_off_matches_sampling():
    d = DeviceModel(variation_stdv=2.5)
    draws = np.minimum(np.abs(np.random.default_rng(0).normal(0, 2.5, 400_000)), 5.0)
    assert d.expected_off() == pytest.approx(draws.mean(), abs=0.01)
