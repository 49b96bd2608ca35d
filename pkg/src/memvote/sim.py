"""Synthetic raw-signal generation with known ground truth.

Each k-mer of the source window dwells in the pore for a random number of
samples (gamma by default, geometric or fixed on request) and emits its model level plus Gaussian noise. Stay and skip
errors are not injected; they arise from dwell variance and noise once the
signal goes through the event detector.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .events import RawSignal
from .kmer_model import BASES, PoreModel, ReferenceSequence, all_kmers, encode_reference

# per-position weights of a k-mer's bases on its level; the middle of the
# pore constriction dominates, as in published R9-era tables
_POSITION_WEIGHTS = {
    5: [0.35, 0.8, 1.0, 0.7, 0.3],
    6: [0.3, 0.7, 1.0, 0.9, 0.5, 0.2],
}


@dataclass(frozen=True)
class SimParams:
    sample_rate: float = 4000.0
    bases_per_second: float = 450.0
    dwell: str = "gamma"  # "gamma" | "geometric" | "fixed"
    dwell_stdv: float = 4.0  # samples, gamma only
    dwell_min: int = 1
    current_noise_stdv: float = 1.5
    drift: float = 0.0  # pA per second
    read_length: int | None = None  # bp; None -> whole reference
    rng_seed: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.bases_per_second <= 0:
            raise ValueError("rates must be positive")
        if self.current_noise_stdv < 0:
            raise ValueError("current_noise_stdv must be >= 0")
        if self.dwell not in ("gamma", "geometric", "fixed"):
            raise ValueError(f"unknown dwell distribution {self.dwell!r}")
        if self.dwell_min < 1:
            raise ValueError("dwell_min must be >= 1")
        if self.dwell == "gamma" and self.dwell_stdv <= 0:
            raise ValueError("dwell_stdv must be positive")

    @property
    def mean_dwell(self) -> float:
        return self.sample_rate / self.bases_per_second


@dataclass(frozen=True)
class SimTruth:
    species: str
    start: int  # offset in reference events (== base offset of the first k-mer)
    length: int  # bp
    boundaries: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)

    def events_before(self, n_samples: int) -> int:
        """Number of true events that start inside the first ``n_samples`` samples."""
        return int(np.searchsorted(self.boundaries, n_samples, side="left"))


def sample_dwells(n: int, p: SimParams, rng: np.random.Generator) -> np.ndarray:
    if p.dwell == "fixed":
        return np.full(n, max(p.dwell_min, int(round(p.mean_dwell))), dtype=np.int64)
    if p.dwell == "gamma":
        shape = (p.mean_dwell / p.dwell_stdv) ** 2
        d = np.rint(rng.gamma(shape, p.mean_dwell / shape, size=n))
        return np.maximum(d, p.dwell_min).astype(np.int64)
    # geometric on {dwell_min, dwell_min+1, ...} with the requested mean
    extra = p.mean_dwell - p.dwell_min + 1
    if extra < 1:
        raise ValueError("dwell_min exceeds the mean dwell")
    return rng.geometric(1.0 / extra, size=n).astype(np.int64) + (p.dwell_min - 1)


def simulate_read(ref: ReferenceSequence, model: PoreModel, start: int, length: int,
                  p: SimParams = SimParams(), rng=None, read_id: str | None = None):
    """Simulate one raw read from ``ref.bases[start:start+length]``.

    Returns ``(RawSignal, SimTruth)``.
    """
    if start < 0 or start + length > len(ref.bases):
        raise ValueError(
            f"window [{start}, {start + length}) outside reference {ref.id!r} of length {len(ref.bases)}"
        )
    if length < model.k:
        raise ValueError(f"read length {length} shorter than k={model.k}")
    rng = np.random.default_rng(p.rng_seed if rng is None else rng)
    window = ReferenceSequence(ref.id, ref.bases[start : start + length])
    levels = encode_reference(window, model).values
    dwells = sample_dwells(len(levels), p, rng)
    samples = np.repeat(levels, dwells)
    if p.current_noise_stdv > 0:
        samples = samples + rng.normal(0.0, p.current_noise_stdv, size=samples.size)
    if p.drift:
        samples = samples + p.drift * np.arange(samples.size) / p.sample_rate
    bounds = np.concatenate(([0], np.cumsum(dwells)[:-1]))
    truth = SimTruth(ref.id, start, length, bounds, levels)
    rid = read_id or f"{ref.id}_{start}"
    raw = RawSignal(rid, samples, p.sample_rate,
                    truth={"species": ref.id, "start": start, "length": length})
    return raw, truth


@dataclass
class Community:
    reads: list
    truths: list

    def manifest_rows(self):
        for raw, t in zip(self.reads, self.truths):
            yield raw.read_id, t.species, t.start, t.length


def simulate_community(specs, model: PoreModel, seed: int = 0) -> Community:
    """Simulate a shuffled mixture.

    ``specs`` is a list of ``(reference, count, SimParams)``. Every read gets its
    own RNG stream spawned from ``seed``, so the dataset does not depend on
    generation order.
    """
    total = sum(int(c) for _, c, _ in specs)
    if any(c < 0 for _, c, _ in specs):
        raise ValueError("read counts must be >= 0")
    streams = np.random.SeedSequence(seed).spawn(total + 1)
    order = np.random.default_rng(streams[-1]).permutation(total)
    jobs = []
    for ref, count, params in specs:
        for _ in range(int(count)):
            jobs.append((ref, params))
    reads, truths = [None] * total, [None] * total
    for slot, (idx, (ref, params)) in zip(order, enumerate(jobs)):
        rng = np.random.default_rng(streams[idx])
        length = params.read_length or len(ref.bases)
        length = min(length, len(ref.bases))
        start = int(rng.integers(0, len(ref.bases) - length + 1))
        raw, truth = simulate_read(ref, model, start, length, params, rng,
                                   read_id=f"read{slot:06d}")
        reads[slot], truths[slot] = raw, truth
    return Community(reads, truths)


def synthetic_pore_model(k: int = 6, seed: int = 0, mean: float = 90.0, stdv: float = 12.0) -> PoreModel:
    """A deterministic stand-in for an ONT k-mer table.

    Levels are an additive per-position base effect plus a small k-mer
    specific term, rescaled to the requested mean and spread; ``ACCGAA`` is
    pinned to 99.07 pA when k == 6.
    """
    rng = np.random.default_rng(seed)
    weights = np.asarray(_POSITION_WEIGHTS.get(k, np.ones(k)), dtype=np.float64)
    effect = rng.normal(size=(k, 4))
    kmers = list(all_kmers(k))
    idx = np.array([[BASES.index(b) for b in km] for km in kmers])
    raw = (weights[None, :] * effect[np.arange(k)[None, :], idx]).sum(axis=1)
    raw = raw + 0.35 * rng.normal(size=len(kmers))
    raw = (raw - raw.mean()) / raw.std()
    levels = np.clip(mean + stdv * raw, 40.0, 160.0)
    table = {km: float(round(lv, 2)) for km, lv in zip(kmers, levels)}
    if k == 6:
        table["ACCGAA"] = 99.07
    sd = {km: 1.5 for km in kmers}
    return PoreModel.from_levels(table, sd)


def random_genome(length: int, seed: int = 0, name: str = "genome") -> ReferenceSequence:
    rng = np.random.default_rng(seed)
    return ReferenceSequence(name, "".join(np.array(list(BASES))[rng.integers(0, 4, size=length)]))


def write_manifest(community: Community, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("#read_id\tspecies\tstart\tlength\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        for row in community.manifest_rows():
            w.writerow(row)


def read_manifest(path) -> dict[str, dict]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rid, species, start, length = line.rstrip("\n").split("\t")
            if rid in out:
                raise ValueError(f"{path}: read {rid} listed twice")
            out[rid] = {"species": species, "start": int(start), "length": int(length)}
    return out
