"""Fuzzy seed-and-vote: seeding, reference index, voting and decisions."""
from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .cam import CamArray, DeviceModel, build_cam, cam_from_bytes, cam_to_bytes, match_pairs
from .events import DetectorParams, EventVector, RawSignal, detect_events, filter_events, normalize_events
from .kmer_model import PoreModel, ReferenceSequence, encode_reference
from .lsh import (ConductanceDist, CrossbarMatrix, LshNoiseParams, crossbar_from_bytes,
                  crossbar_to_bytes, generate_crossbar, hash_seeds)

INDEX_MAGIC = b"MVIX"
INDEX_VERSION = 1


class IndexVersionError(ValueError):
    pass


@dataclass(frozen=True)
class AlignConfig:
    m: int = 10
    hash_bits: int = 128
    cam_threshold: int = 7
    votes_min: int = 3
    ratio: float = 2.0
    max_samples: int | None = 4000
    diff_threshold: float = 3.0
    bucket_size: int = 400
    backend: str = "digital"
    center_seeds: bool = True
    normalize: bool = False

    def __post_init__(self):
        for name in ("m", "hash_bits", "bucket_size", "votes_min"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.ratio != 2:
            raise ValueError("the vote ratio is fixed at 2")
        if not 0 <= self.cam_threshold <= self.hash_bits:
            raise ValueError("cam_threshold must lie in [0, hash_bits]")
        if self.max_samples is not None and self.max_samples < 1:
            raise ValueError("max_samples must be positive")
        if self.diff_threshold < 0:
            raise ValueError("diff_threshold must be >= 0")
        if self.backend not in ("analog", "digital"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True, eq=False)
class SpeciesIndex:
    species: str
    cam: CamArray
    n_buckets: int
    bucket_size: int

    def bucket_offset(self, bucket: int) -> int:
        """Genome offset (bases) of the first k-mer in ``bucket``."""
        return bucket * self.bucket_size


@dataclass(frozen=True, eq=False)
class ReferenceIndex:
    species: list[SpeciesIndex]
    crossbar: CrossbarMatrix
    config: dict

    @property
    def species_ids(self) -> list[str]:
        return [s.species for s in self.species]

    def get(self, species: str) -> SpeciesIndex:
        for s in self.species:
            if s.species == species:
                return s
        raise KeyError(species)


@dataclass
class VoteTally:
    counts: dict[tuple[str, int], int] = field(default_factory=dict)

    def top(self, n: int = 3):
        """Highest ``n`` buckets; ties broken by (species, bucket) order of insertion."""
        ranked = sorted(self.counts.items(), key=lambda kv: -kv[1])
        return ranked[:n]

    def species_totals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (sp, _), v in self.counts.items():
            out[sp] = out.get(sp, 0) + v
        return out


@dataclass(frozen=True)
class MappingResult:
    read_id: str
    decision: str  # "mapped" | "boundary" | "unmapped"
    species: str | None = None
    bucket: int | None = None
    bucket2: int | None = None
    v1: int = 0
    v2: int = 0
    v3: int = 0
    truth: dict | None = None

    @property
    def is_mapped(self) -> bool:
        return self.decision != "unmapped"


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    recall: float
    precision: float
    f1: float


def extract_seeds(events, m: int) -> np.ndarray:
    """Stride-1 windows of ``m`` consecutive events, shape ``(n - m + 1, m)``."""
    v = np.asarray(events.values if isinstance(events, EventVector) else events, dtype=np.float64)
    if len(v) < m:
        return np.empty((0, m))
    return np.lib.stride_tricks.sliding_window_view(v, m).copy()


def build_index(refs: list[ReferenceSequence], model: PoreModel, cfg: AlignConfig = AlignConfig(),
                dev: DeviceModel = DeviceModel(), crossbar_seed: int = 0, cam_seed: int = 0,
                dist: ConductanceDist = ConductanceDist()) -> ReferenceIndex:
    """Encode, seed, hash and program every reference into its own CAM.

    Row ``i`` holds the seed starting at reference k-mer ``i`` and belongs to
    bucket ``i // bucket_size``. All species share one crossbar.
    """
    if not refs:
        raise ValueError("no references")
    if len({r.id for r in refs}) != len(refs):
        raise ValueError("duplicate reference ids")
    cb = generate_crossbar(cfg.m, cfg.hash_bits, dist, crossbar_seed)
    cam_streams = np.random.SeedSequence(cam_seed).spawn(len(refs))
    species = []
    for ref, stream in zip(refs, cam_streams):
        expected = encode_reference(ref, model)
        seeds = extract_seeds(expected.values, cfg.m)
        if len(seeds) == 0:
            raise ValueError(f"reference {ref.id!r} yields fewer than m={cfg.m} events")
        hashes = hash_seeds(seeds, cb, center=cfg.center_seeds)
        buckets = np.arange(len(seeds)) // cfg.bucket_size
        cam = build_cam(hashes, buckets, dev, int(stream.generate_state(1)[0]))
        species.append(SpeciesIndex(ref.id, cam, int(buckets[-1]) + 1, cfg.bucket_size))
    config = {
        "align": asdict(cfg),
        "device": asdict(dev),
        "dist": asdict(dist),
        "k": model.k,
        "seeds": {"crossbar": crossbar_seed, "cam": cam_seed},
    }
    return ReferenceIndex(species, cb, config)


@dataclass(frozen=True)
class VoteProfile:
    """Cumulative vote counts for every CAM threshold.

    ``cum[s][b, T]`` is the number of (seed, row) matches in bucket ``b`` of
    species ``s`` at threshold ``T``.
    """

    species: list[str]
    cum: list[np.ndarray]
    n_seeds: int

    def tally(self, threshold: int) -> VoteTally:
        counts = {}
        for sp, c in zip(self.species, self.cum):
            t = min(threshold, c.shape[1] - 1)
            for b in np.flatnonzero(c[:, t]):
                counts[(sp, int(b))] = int(c[b, t])
        return VoteTally(counts)

    def flat(self, threshold: int) -> np.ndarray:
        """Votes of every (species, bucket) at ``threshold``, species-major."""
        return np.concatenate([c[:, min(threshold, c.shape[1] - 1)] for c in self.cum])


def seed_hashes(index: ReferenceIndex, seeds, cfg: AlignConfig, noise: LshNoiseParams = LshNoiseParams(),
                rng=None) -> np.ndarray:
    return hash_seeds(seeds, index.crossbar, noise, rng, center=cfg.center_seeds)


def vote_profile(index: ReferenceIndex, seeds, cfg: AlignConfig, noise: LshNoiseParams = LshNoiseParams(),
                 rng=None, max_threshold: int | None = None) -> VoteProfile:
    """Search every seed against every species once and histogram match levels."""
    width = index.crossbar.bits
    tmax = width if max_threshold is None else min(max_threshold, width)
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, index.crossbar.m)
    cum = []
    hashes = seed_hashes(index, seeds, cfg, noise, rng) if len(seeds) else None
    for sp in index.species:
        hist = np.zeros((sp.n_buckets, tmax + 1), dtype=np.int64)
        if hashes is not None:
            _, rows, lv = match_pairs(sp.cam, hashes, tmax, cfg.backend)
            np.add.at(hist, (sp.cam.row_to_bucket[rows], lv.astype(np.int64)), 1)
        cum.append(np.cumsum(hist, axis=1))
    return VoteProfile([s.species for s in index.species], cum, len(seeds))


def tally_votes(index: ReferenceIndex, seeds, cfg: AlignConfig, noise: LshNoiseParams = LshNoiseParams(),
                rng=None) -> VoteTally:
    """Each matched row adds one vote to its bucket (row-level counting)."""
    if len(seeds) == 0:
        return VoteTally()
    return vote_profile(index, seeds, cfg, noise, rng, max_threshold=cfg.cam_threshold).tally(cfg.cam_threshold)


def decide(tally: VoteTally, cfg: AlignConfig, read_id: str = "", truth=None) -> MappingResult:
    """Apply the 2x-ratio, minimum-vote and adjacent-bucket rules."""
    top = tally.top(3)
    votes = [v for _, v in top] + [0] * (3 - len(top))
    v1, v2, v3 = votes
    if top and v1 >= cfg.ratio * v2 and v1 >= cfg.votes_min:
        (sp, b), _ = top[0]
        return MappingResult(read_id, "mapped", sp, b, None, v1, v2, v3, truth)
    if len(top) >= 2:
        (sp1, b1), (sp2, b2) = top[0][0], top[1][0]
        pair = v1 + v2
        if sp1 == sp2 and abs(b1 - b2) == 1 and pair >= cfg.ratio * v3 and pair >= cfg.votes_min:
            return MappingResult(read_id, "boundary", sp1, min(b1, b2), max(b1, b2), v1, v2, v3, truth)
    return MappingResult(read_id, "unmapped", None, None, None, v1, v2, v3, truth)


def read_seeds(raw: RawSignal, cfg: AlignConfig, det: DetectorParams = DetectorParams(),
               model: PoreModel | None = None) -> np.ndarray:
    """Truncate, segment, filter, optionally normalise and seed one read."""
    raw = raw.truncated(cfg.max_samples)
    if len(raw.samples) <= 2 * det.long_window:
        return np.empty((0, cfg.m))
    ev = filter_events(detect_events(raw, det), cfg.diff_threshold)
    if cfg.normalize and len(ev) and model is not None:
        ev = normalize_events(ev, model)
    return extract_seeds(ev, cfg.m)


def map_read(index: ReferenceIndex, raw: RawSignal, cfg: AlignConfig,
             det: DetectorParams = DetectorParams(), noise: LshNoiseParams = LshNoiseParams(),
             rng=None, model: PoreModel | None = None) -> MappingResult:
    seeds = read_seeds(raw, cfg, det, model)
    tally = tally_votes(index, seeds, cfg, noise, rng)
    return decide(tally, cfg, raw.read_id, raw.truth or None)


def classify_detection(index: ReferenceIndex, raw: RawSignal, cfg: AlignConfig,
                       det: DetectorParams = DetectorParams(), noise: LshNoiseParams = LshNoiseParams(),
                       rng=None, species: str | None = None) -> bool:
    """True when the target's single bucket collects more than ``votes_min`` votes."""
    target = index.get(species) if species else index.species[0]
    if target.n_buckets != 1:
        raise ValueError("detection mode expects a single-bucket reference")
    seeds = read_seeds(raw, cfg, det)
    return detection_votes(index, seeds, cfg, noise, rng, target.species) > cfg.votes_min


def detection_votes(index, seeds, cfg, noise=LshNoiseParams(), rng=None, species=None) -> int:
    target = species or index.species[0].species
    return tally_votes(index, seeds, cfg, noise, rng).counts.get((target, 0), 0)


def detection_result(read_id: str, votes: int, votes_min: int, species: str, truth=None) -> MappingResult:
    if votes > votes_min:
        return MappingResult(read_id, "mapped", species, 0, None, votes, 0, 0, truth)
    return MappingResult(read_id, "unmapped", None, None, None, votes, 0, 0, truth)


@dataclass
class AbundanceResult:
    species: list[str]
    assigned: list[str | None]
    abundance: dict[str, float]
    confusion: np.ndarray | None  # rows: true species, cols: species + unclassified
    accuracy: float | None
    error: str | None = None


def assign_species(tally: VoteTally, species: list[str]) -> str | None:
    """Argmax species by total votes; ties (including all-zero) stay unclassified."""
    totals = tally.species_totals()
    v = np.array([totals.get(s, 0) for s in species])
    if v.size == 0 or v.max() == 0 or np.count_nonzero(v == v.max()) > 1:
        return None
    return species[int(v.argmax())]


def abundance_from_assignments(species: list[str], assigned, truths=None) -> AbundanceResult:
    if not assigned:
        return AbundanceResult(species, [], {}, None, None, error="no reads")
    counts = {s: 0 for s in species}
    for a in assigned:
        if a is not None:
            counts[a] += 1
    n_cls = sum(counts.values())
    abundance = {s: (c / n_cls if n_cls else 0.0) for s, c in counts.items()}
    confusion = accuracy = None
    if truths is not None:
        col = {s: i for i, s in enumerate(species)}
        confusion = np.zeros((len(species), len(species) + 1), dtype=np.int64)
        correct = 0
        for a, t in zip(assigned, truths):
            if t not in col:
                continue
            confusion[col[t], col[a] if a is not None else len(species)] += 1
            correct += a == t
        total = int(confusion.sum())
        accuracy = correct / total if total else 0.0
    return AbundanceResult(species, list(assigned), abundance, confusion, accuracy)


def estimate_abundance(index: ReferenceIndex, reads, cfg: AlignConfig,
                       det: DetectorParams = DetectorParams(), noise: LshNoiseParams = LshNoiseParams(),
                       rng_seed: int = 0) -> AbundanceResult:
    """Assign each read to the species with most votes and tally proportions."""
    species = index.species_ids
    if len(species) < 2:
        raise ValueError("abundance estimation needs at least two species")
    reads = list(reads)
    streams = np.random.SeedSequence(rng_seed).spawn(max(len(reads), 1))
    assigned = []
    for raw, stream in zip(reads, streams):
        seeds = read_seeds(raw, cfg, det)
        assigned.append(assign_species(tally_votes(index, seeds, cfg, noise, np.random.default_rng(stream)),
                                       species))
    truths = [r.truth.get("species") for r in reads] if reads and all(r.truth for r in reads) else None
    return abundance_from_assignments(species, assigned, truths)


def metrics_from_counts(tp: int, fn: int, fp: int) -> Metrics:
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return Metrics(tp, fp, fn, recall, precision, f1)


def truth_buckets(truth: dict, bucket_size: int, m: int, n_events: int | None = None) -> tuple[int, int]:
    """Bucket span covered by the seeds a read could produce."""
    start = truth["start"]
    n = n_events if n_events is not None else truth["length"]
    last = start + max(n - m, 0)
    return start // bucket_size, last // bucket_size


def is_correct(res: MappingResult, truth: dict, slack: int, bucket_size: int, m: int) -> bool:
    if res.species != truth["species"]:
        return False
    lo, hi = truth_buckets(truth, bucket_size, m, truth.get("n_events"))
    lo, hi = lo - slack, hi + slack
    got_lo = res.bucket
    got_hi = res.bucket2 if res.bucket2 is not None else res.bucket
    return got_lo <= hi and got_hi >= lo


def score(results, truths, reference_species, overlap_slack: int = 1, bucket_size: int = 400,
          m: int = 10) -> Metrics:
    """Recall/precision/F1 against simulator truth.

    A mapping is a true positive when it names the true species and its
    bucket(s) overlap the read's true bucket span widened by ``overlap_slack``.
    Reads from species outside ``reference_species`` only ever add false
    positives.
    """
    ref = set(reference_species)
    tp = fp = fn = 0
    for res, t in zip(results, truths):
        in_ref = t["species"] in ref
        if res.is_mapped:
            if in_ref and is_correct(res, t, overlap_slack, bucket_size, m):
                tp += 1
            else:
                fp += 1
        elif in_ref:
            fn += 1
    return metrics_from_counts(tp, fn, fp)


def save_index(index: ReferenceIndex, path) -> None:
    """``MVIX | u16 version | u32 len + JSON config | u32 len + crossbar blob |
    u32 n_species`` then per species ``u16 len + utf-8 id | u32 n_buckets |
    u32 bucket_size | u64 len + CAM blob``; all little-endian."""
    out = io.BytesIO()
    out.write(INDEX_MAGIC + struct.pack("<H", INDEX_VERSION))
    cfg = json.dumps(index.config, sort_keys=True).encode()
    out.write(struct.pack("<I", len(cfg)) + cfg)
    xb = crossbar_to_bytes(index.crossbar)
    out.write(struct.pack("<I", len(xb)) + xb)
    out.write(struct.pack("<I", len(index.species)))
    for sp in index.species:
        name = sp.species.encode()
        blob = cam_to_bytes(sp.cam)
        out.write(struct.pack("<H", len(name)) + name)
        out.write(struct.pack("<IIQ", sp.n_buckets, sp.bucket_size, len(blob)) + blob)
    with open(path, "wb") as fh:
        fh.write(out.getvalue())


def load_index(path) -> ReferenceIndex:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != INDEX_MAGIC:
        raise ValueError(f"{path}: not an index file")
    (version,) = struct.unpack("<H", buf.read(2))
    if version != INDEX_VERSION:
        raise IndexVersionError(f"{path}: index version {version}, expected {INDEX_VERSION}")
    try:
        (n,) = struct.unpack("<I", buf.read(4))
        config = json.loads(buf.read(n))
        (n,) = struct.unpack("<I", buf.read(4))
        cb = crossbar_from_bytes(buf.read(n))
        (ns,) = struct.unpack("<I", buf.read(4))
        species = []
        for _ in range(ns):
            (ln,) = struct.unpack("<H", buf.read(2))
            name = buf.read(ln).decode()
            nb, bs, blen = struct.unpack("<IIQ", buf.read(16))
            species.append(SpeciesIndex(name, cam_from_bytes(buf.read(blen)), nb, bs))
    except (struct.error, ValueError) as exc:
        raise ValueError(f"{path}: corrupt index ({exc})") from None
    return ReferenceIndex(species, cb, config)
