"""Approximate-match CAM built from differential memristor pairs.

Each stored bit occupies two devices: bit 1 is ``(g_on, g_off)`` and bit 0
is ``(g_off, g_on)``. A query drives the first device of pair ``j`` when its
bit is 0 and the second when it is 1, so a matching bit activates the
off-state device and a mismatch activates the on-state one. The match-line
current therefore counts mismatches in units of ``v_read * g_on``.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .lsh import pack_bits, unpack_bits

CAM_MAGIC = b"MVCA"
CAM_VERSION = 1


@dataclass(frozen=True)
class DeviceModel:
    g_on_target: float = 150.0  # uS
    g_off_target: float = 0.0
    write_tolerance: float = 5.0
    variation_stdv: float = 2.5
    v_read: float = 0.2  # V
    outlier_rate: float = 0.0

    def __post_init__(self):
        if not self.g_on_target > self.g_off_target >= 0:
            raise ValueError("need g_on_target > g_off_target >= 0")
        if self.variation_stdv < 0 or self.write_tolerance < 0:
            raise ValueError("variation_stdv and write_tolerance must be >= 0")
        if not 0 <= self.outlier_rate <= 1:
            raise ValueError("outlier_rate must be a probability")

    def expected_on(self) -> float:
        """Mean programmed on-state conductance (symmetric clip keeps the target)."""
        return self.g_on_target

    def expected_off(self) -> float:
        """Mean programmed off-state conductance.

        Half-normal around a zero target, otherwise clipped symmetric normal.
        """
        s, tol = self.variation_stdv, self.write_tolerance
        if s == 0:
            return self.g_off_target
        if self.g_off_target == 0:
            # E[min(|Z| s, tol)]
            a = tol / s
            return float(s * (np.sqrt(2 / np.pi) * (1 - np.exp(-a * a / 2)))
                         + tol * 2 * stats.norm.sf(a))
        return self.g_off_target


@dataclass(frozen=True, eq=False)
class CamArray:
    conductances: np.ndarray  # (R, 2B) float32 uS
    stored_bits: np.ndarray  # (R, B) bool
    row_to_bucket: np.ndarray  # (R,) int
    device: DeviceModel
    outliers: np.ndarray | None = None  # (R, 2B) bool

    @property
    def n_rows(self) -> int:
        return self.stored_bits.shape[0]

    @property
    def width(self) -> int:
        return self.stored_bits.shape[1]

    def __eq__(self, other):
        return (isinstance(other, CamArray) and self.device == other.device
                and np.array_equal(self.conductances, other.conductances)
                and np.array_equal(self.stored_bits, other.stored_bits)
                and np.array_equal(self.row_to_bucket, other.row_to_bucket))

    def sense_reference(self, threshold: int) -> float:
        """Match-line current (uA) below which a row reads as a match."""
        d = self.device
        on, off = d.expected_on(), d.expected_off()
        t = threshold + 0.5
        return d.v_read * (t * on + (self.width - t) * off)


def build_cam(hashes, buckets=None, dev: DeviceModel = DeviceModel(), rng_seed: int = 0) -> CamArray:
    """Program hashes into a differential CAM with write-and-verify spread.

    On-state devices are drawn from N(g_on, s) clipped to +-tolerance. With a
    zero off target the off state is ``|N(0, s)|`` clipped at the tolerance,
    since negative conductance is unphysical.
    """
    bits = np.asarray(hashes, dtype=bool)
    if bits.ndim != 2:
        widths = {len(h) for h in hashes}
        raise ValueError(f"mixed hash widths {sorted(widths)}")
    R, B = bits.shape
    if buckets is None:
        buckets = np.zeros(R, dtype=np.int64)
    buckets = np.asarray(buckets, dtype=np.int64)
    if buckets.shape != (R,):
        raise ValueError("need one bucket id per row")
    rng = np.random.default_rng(rng_seed)
    s, tol = dev.variation_stdv, dev.write_tolerance
    on = dev.g_on_target + rng.normal(0.0, 1.0, (R, B)) * s
    on = np.clip(on, dev.g_on_target - tol, dev.g_on_target + tol)
    if dev.g_off_target == 0:
        off = np.minimum(np.abs(rng.normal(0.0, 1.0, (R, B)) * s), tol)
    else:
        off = np.clip(dev.g_off_target + rng.normal(0.0, 1.0, (R, B)) * s,
                      dev.g_off_target - tol, dev.g_off_target + tol)
    on = np.maximum(on, 0.0)
    off = np.maximum(off, 0.0)
    g = np.empty((R, 2 * B))
    g[:, 0::2] = np.where(bits, on, off)
    g[:, 1::2] = np.where(bits, off, on)
    outliers = None
    if dev.outlier_rate > 0:
        outliers = rng.random(g.shape) < dev.outlier_rate
        g[outliers] = rng.uniform(0.0, dev.g_on_target, size=int(outliers.sum()))
    return CamArray(g.astype(np.float32), bits.copy(), buckets, dev, outliers)


def row_current(cam: CamArray, row: int, query) -> float:
    """Match-line current of one row in uA."""
    if not 0 <= row < cam.n_rows:
        raise IndexError(f"row {row} out of range for {cam.n_rows}-row CAM")
    q = np.asarray(query, dtype=bool)
    if q.shape != (cam.width,):
        raise ValueError(f"query width {q.size} != CAM width {cam.width}")
    g = cam.conductances[row].astype(np.float64)
    active = np.where(q, g[1::2], g[0::2])
    return cam.device.v_read * float(active.sum())


def row_currents(cam: CamArray, queries) -> np.ndarray:
    """Currents (uA) for every (query, row) pair; shape ``(n, R)``."""
    q = np.atleast_2d(np.asarray(queries, dtype=bool)).astype(np.float64)
    g = cam.conductances.astype(np.float64)
    g0, g1 = g[:, 0::2], g[:, 1::2]
    return cam.device.v_read * (g0.sum(axis=1)[None, :] + q @ (g1 - g0).T)


class _Prepared:
    """Cached float32 operands for batched level computation."""

    def __init__(self, cam: CamArray):
        d = cam.device
        g = cam.conductances
        g0, g1 = g[:, 0::2], g[:, 1::2]
        self.base = g0.sum(axis=1, dtype=np.float64).astype(np.float32)
        self.delta_t = np.ascontiguousarray((g1 - g0).T.astype(np.float32))
        self.bits_t = np.ascontiguousarray(cam.stored_bits.T.astype(np.float32))
        self.signs_t = 2.0 * self.bits_t - 1.0
        self.ones = cam.stored_bits.sum(axis=1).astype(np.float32)
        on, off = d.expected_on(), d.expected_off()
        self.off_total = np.float32(cam.width * off)
        self.unit = np.float32(on - off)


_PREP_CACHE: dict[int, tuple[CamArray, _Prepared]] = {}


def _prepared(cam: CamArray) -> _Prepared:
    hit = _PREP_CACHE.get(id(cam))
    if hit is None or hit[0] is not cam:
        if len(_PREP_CACHE) > 64:
            _PREP_CACHE.clear()
        hit = (cam, _Prepared(cam))
        _PREP_CACHE[id(cam)] = hit
    return hit[1]


def match_levels(cam: CamArray, queries, backend: str = "digital") -> np.ndarray:
    """Smallest CAM threshold at which each (query, row) pair matches.

    ``search(cam, q, T)`` contains row ``r`` exactly when the level is <= T,
    so one call answers every threshold. Digital levels are Hamming
    distances; analog levels come from the calibrated match-line current.
    Returns int16 of shape ``(n, R)``.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=bool))
    if q.shape[1] != cam.width:
        raise ValueError(f"query width {q.shape[1]} != CAM width {cam.width}")
    p = _prepared(cam)
    qf = q.astype(np.float32)
    if backend == "digital":
        dot = qf @ p.bits_t
        ham = qf.sum(axis=1)[:, None] + p.ones[None, :] - 2.0 * dot
        return np.rint(ham).astype(np.int16)
    if backend == "analog":
        g_sum = p.base[None, :] + qf @ p.delta_t
        x = (g_sum - p.off_total) / p.unit
        return np.maximum(np.floor(x - np.float32(0.5)) + 1, 0).astype(np.int16)
    raise ValueError(f"unknown backend {backend!r}")


def match_pairs(cam: CamArray, queries, max_level: int, backend: str = "digital"):
    """Sparse form of :func:`match_levels` keeping only levels <= ``max_level``.

    Returns ``(query_idx, row_idx, level)`` arrays. Only the surviving pairs
    are converted to levels, which keeps large references cheap to search.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=bool))
    if q.shape[1] != cam.width:
        raise ValueError(f"query width {q.shape[1]} != CAM width {cam.width}")
    p = _prepared(cam)
    if backend == "digital":
        # +-1 encoding: dot = B - 2 * hamming
        dot = (2.0 * q.astype(np.float32) - 1.0) @ p.signs_t
        qi, ri = np.nonzero(dot >= np.float32(cam.width - 2 * max_level) - np.float32(0.5))
        lv = np.rint((cam.width - dot[qi, ri]) / 2).astype(np.int16)
    elif backend == "analog":
        acc = q.astype(np.float32) @ p.delta_t
        # level <= L  <=>  x < L + 0.5; a float32 slack of one unit is re-checked below
        bound = (np.float32(max_level + 1.5) * p.unit + p.off_total) - p.base
        qi, ri = np.nonzero(acc < bound[None, :])
        x = (p.base[ri] + acc[qi, ri] - p.off_total) / p.unit
        lv = np.maximum(np.floor(x - np.float32(0.5)) + 1, 0).astype(np.int16)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    keep = lv <= max_level
    return qi[keep], ri[keep], lv[keep]


def search(cam: CamArray, query, cam_threshold: int, backend: str = "digital") -> np.ndarray:
    """Indices of rows that match ``query`` within ``cam_threshold`` mismatches."""
    if not 0 <= cam_threshold <= cam.width:
        raise ValueError(f"cam_threshold must be in [0, {cam.width}]")
    q = np.asarray(query, dtype=bool)
    if backend == "analog":
        cur = row_currents(cam, q[None, :])[0]
        return np.flatnonzero(cur < cam.sense_reference(cam_threshold))
    if backend == "digital":
        ham = np.count_nonzero(cam.stored_bits != q[None, :], axis=1)
        return np.flatnonzero(ham <= cam_threshold)
    raise ValueError(f"unknown backend {backend!r}")


def cam_to_bytes(cam: CamArray) -> bytes:
    """``MVCA | u16 version | u32 R | u32 B | 6 x f64 device | u8 has_outliers``,
    then packed stored bits (8 per byte, little bit order, row-major),
    ``R*2B`` little-endian float32 conductances, ``R`` little-endian int32
    bucket ids and, if flagged, the packed outlier mask."""
    d = cam.device
    out = io.BytesIO()
    out.write(CAM_MAGIC)
    out.write(struct.pack("<HII6dB", CAM_VERSION, cam.n_rows, cam.width, d.g_on_target,
                          d.g_off_target, d.write_tolerance, d.variation_stdv, d.v_read,
                          d.outlier_rate, cam.outliers is not None))
    out.write(pack_bits(cam.stored_bits).tobytes())
    out.write(cam.conductances.astype("<f4").tobytes())
    out.write(cam.row_to_bucket.astype("<i4").tobytes())
    if cam.outliers is not None:
        out.write(pack_bits(cam.outliers).tobytes())
    return out.getvalue()


_CAM_HEAD = struct.Struct("<HII6dB")


def _take(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise ValueError("truncated CAM blob")
    return data


def cam_from_bytes(blob: bytes) -> CamArray:
    buf = io.BytesIO(blob)
    if buf.read(4) != CAM_MAGIC:
        raise ValueError("not a CAM blob")
    version, R, B, *dev, has_out = _CAM_HEAD.unpack(_take(buf, _CAM_HEAD.size))
    if version != CAM_VERSION:
        raise ValueError(f"unsupported CAM blob version {version}")
    nbytes = (B + 7) // 8
    bits = unpack_bits(np.frombuffer(_take(buf, R * nbytes), dtype=np.uint8).reshape(R, nbytes), B)
    g = np.frombuffer(_take(buf, 4 * R * 2 * B), dtype="<f4").reshape(R, 2 * B).astype(np.float32)
    buckets = np.frombuffer(_take(buf, 4 * R), dtype="<i4").astype(np.int64)
    outliers = None
    if has_out:
        nb2 = (2 * B + 7) // 8
        outliers = unpack_bits(np.frombuffer(_take(buf, R * nb2), dtype=np.uint8).reshape(R, nb2), 2 * B)
    return CamArray(g, bits, buckets, DeviceModel(*dev), outliers)
