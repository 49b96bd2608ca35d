"""Random-hyperplane LSH on a simulated memristor crossbar.

A seed ``a`` (m event currents) drives the rows of an ``m x 2B`` conductance
array. Output pair ``j`` compares column ``2j`` against ``2j+1``; the bit is
set when the first column's current is strictly larger, i.e. the sign of
``a @ G`` with ``G`` the adjacent-column difference matrix.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

BLOB_MAGIC = b"MVXB"
BLOB_VERSION = 1


@dataclass(frozen=True)
class ConductanceDist:
    """``lognormal``: reset-pulse spread (median/sigma in log space, truncated at ``g_max``).
    ``gaussian``: ideal N(0, 1) difference matrix."""

    kind: str = "lognormal"
    median: float = 4.0
    sigma_ln: float = 0.9
    g_max: float = 60.0

    def __post_init__(self):
        if self.kind not in ("lognormal", "gaussian"):
            raise ValueError(f"unknown conductance distribution {self.kind!r}")
        if self.kind == "lognormal":
            if self.median <= 0 or self.sigma_ln <= 0 or self.g_max <= 0:
                raise ValueError("lognormal parameters must be positive")
            if self.g_max <= self.median * np.exp(-6 * self.sigma_ln):
                raise ValueError("truncation point leaves no probability mass")


@dataclass(frozen=True, eq=False)
class CrossbarMatrix:
    conductances: np.ndarray  # (m, 2*bits) uS, float32
    rng_seed: int
    dist: ConductanceDist

    @property
    def m(self) -> int:
        return self.conductances.shape[0]

    @property
    def bits(self) -> int:
        return self.conductances.shape[1] // 2

    def __eq__(self, other):
        return (isinstance(other, CrossbarMatrix) and self.rng_seed == other.rng_seed
                and self.dist == other.dist
                and np.array_equal(self.conductances, other.conductances))


@dataclass(frozen=True)
class LshNoiseParams:
    read_noise_stdv: float = 0.0  # uS, fresh per device per access

    def __post_init__(self):
        if self.read_noise_stdv < 0:
            raise ValueError("read_noise_stdv must be >= 0")


def _truncated_lognormal(rng, size, dist: ConductanceDist) -> np.ndarray:
    out = np.empty(size)
    flat = out.reshape(-1)
    todo = np.arange(flat.size)
    mu = np.log(dist.median)
    while todo.size:
        draw = rng.lognormal(mu, dist.sigma_ln, size=todo.size)
        ok = draw <= dist.g_max
        flat[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return out


def generate_crossbar(m: int = 10, bits: int = 128, dist: ConductanceDist = ConductanceDist(),
                      rng_seed: int = 0) -> CrossbarMatrix:
    """Draw an ``m x 2*bits`` conductance array.

    For the gaussian backend each difference entry ``d ~ N(0, 1)`` is stored
    as the non-negative pair ``(max(d, 0), max(-d, 0))``.
    """
    if m < 1 or bits < 1:
        raise ValueError("m and bits must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if dist.kind == "lognormal":
        g = _truncated_lognormal(rng, (m, 2 * bits), dist)
    else:
        d = rng.standard_normal((m, bits))
        g = np.empty((m, 2 * bits))
        g[:, 0::2] = np.maximum(d, 0.0)
        g[:, 1::2] = np.maximum(-d, 0.0)
    return CrossbarMatrix(g.astype(np.float32), rng_seed, dist)


def effective_matrix(cb: CrossbarMatrix) -> np.ndarray:
    """``G[i, j] = c[i, 2j] - c[i, 2j+1]`` in float64."""
    c = cb.conductances.astype(np.float64)
    return c[:, 0::2] - c[:, 1::2]


def hash_seeds(seeds, cb: CrossbarMatrix, noise: LshNoiseParams = LshNoiseParams(),
               rng=None, center: bool = False) -> np.ndarray:
    """Hash a batch of seeds, shape ``(n, m)`` -> bool ``(n, bits)``.

    Per-access read noise on every device adds ``sum_i a_i (eta_i - eta'_i)``
    to each column-pair difference; that sum is drawn directly as
    ``N(0, 2 sigma^2 |a|^2)``, which has the same distribution.
    """
    a = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    if a.shape[1] != cb.m:
        raise ValueError(f"seed length {a.shape[1]} != crossbar rows {cb.m}")
    if center:
        a = a - a.mean(axis=1, keepdims=True)
    proj = a @ effective_matrix(cb)
    if noise.read_noise_stdv > 0:
        if rng is None:
            raise ValueError("read noise needs an explicit rng stream")
        rng = np.random.default_rng(rng)
        scale = np.sqrt(2.0) * noise.read_noise_stdv * np.linalg.norm(a, axis=1, keepdims=True)
        proj = proj + rng.standard_normal(proj.shape) * scale
    return proj > 0  # ties resolve to 0


def hash_seed(seed, cb: CrossbarMatrix, noise: LshNoiseParams = LshNoiseParams(),
              rng=None, center: bool = False) -> np.ndarray:
    return hash_seeds(np.asarray(seed, dtype=np.float64)[None, :], cb, noise, rng, center)[0]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(bits, dtype=bool), axis=-1, bitorder="little")


def unpack_bits(packed: np.ndarray, width: int) -> np.ndarray:
    return np.unpackbits(packed, axis=-1, count=width, bitorder="little").astype(bool)


def hamming(a, b) -> np.ndarray:
    return np.count_nonzero(np.asarray(a, dtype=bool) != np.asarray(b, dtype=bool), axis=-1)


def crossbar_to_bytes(cb: CrossbarMatrix) -> bytes:
    """Header ``MVXB | u16 version | u32 m | u32 cols | u64 seed | u8 kind | 3 x f64``,
    then ``m*cols`` little-endian float32 conductances in row-major order."""
    kind = 0 if cb.dist.kind == "lognormal" else 1
    head = BLOB_MAGIC + struct.pack(
        "<HIIQB3d", BLOB_VERSION, cb.m, 2 * cb.bits, cb.rng_seed, kind,
        cb.dist.median, cb.dist.sigma_ln, cb.dist.g_max,
    )
    return head + cb.conductances.astype("<f4").tobytes()


_HEAD = struct.Struct("<HIIQB3d")


def crossbar_from_bytes(blob: bytes) -> CrossbarMatrix:
    buf = io.BytesIO(blob)
    if buf.read(4) != BLOB_MAGIC:
        raise ValueError("not a crossbar blob")
    version, m, cols, seed, kind, med, sig, gmax = _HEAD.unpack(buf.read(_HEAD.size))
    if version != BLOB_VERSION:
        raise ValueError(f"unsupported crossbar blob version {version}")
    data = np.frombuffer(buf.read(4 * m * cols), dtype="<f4")
    if data.size != m * cols:
        raise ValueError("truncated crossbar blob")
    dist = ConductanceDist("lognormal" if kind == 0 else "gaussian", med, sig, gmax)
    return CrossbarMatrix(data.reshape(m, cols).astype(np.float32), int(seed), dist)
