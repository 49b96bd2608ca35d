"""Batch evaluation: vote profiles over read sets, threshold grids and the
desk-scale datasets for virus detection, abundance and read mapping."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .aligner import (AlignConfig, MappingResult, ReferenceIndex, VoteProfile, VoteTally,
                      assign_species, decide, detection_result, metrics_from_counts, read_seeds,
                      score, seed_hashes)
from .cam import match_pairs
from .events import DetectorParams, EventVector, detect_events, filter_events
from .kmer_model import PoreModel, ReferenceSequence
from .lsh import LshNoiseParams
from .sim import Community, SimParams, random_genome, simulate_community

SARS_COV_2_LENGTH = 29903


@dataclass(frozen=True)
class SweepRow:
    cam_threshold: int
    second: int  # votes_min or max_samples, depending on the sweep
    recall: float
    precision: float
    f1: float
    tp: int
    fp: int
    fn: int


def read_hashes(index: ReferenceIndex, reads, cfg: AlignConfig, det: DetectorParams = DetectorParams(),
                noise: LshNoiseParams = LshNoiseParams(), read_noise_seed: int = 0, threads: int = 1):
    """Hashed seeds of every read, in input order.

    Read ``i`` draws its LSH read noise from the ``i``-th child of
    ``read_noise_seed``, so results do not depend on scheduling.
    """
    reads = list(reads)
    streams = np.random.SeedSequence(read_noise_seed).spawn(len(reads))

    def one(job):
        raw, stream = job
        seeds = read_seeds(raw, cfg, det)
        if len(seeds) == 0:
            return np.zeros((0, index.crossbar.bits), dtype=bool)
        return seed_hashes(index, seeds, cfg, noise, np.random.default_rng(stream))

    jobs = list(zip(reads, streams))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]


def profile_from_hashes(index: ReferenceIndex, hashes: np.ndarray, backend: str,
                        max_threshold: int) -> VoteProfile:
    tmax = min(max_threshold, index.crossbar.bits)
    cum = []
    for sp in index.species:
        hist = np.zeros((sp.n_buckets, tmax + 1), dtype=np.int64)
        if len(hashes):
            _, rows, lv = match_pairs(sp.cam, hashes, tmax, backend)
            np.add.at(hist, (sp.cam.row_to_bucket[rows], lv.astype(np.int64)), 1)
        cum.append(np.cumsum(hist, axis=1))
    return VoteProfile(index.species_ids, cum, len(hashes))


def read_profiles(index: ReferenceIndex, reads, cfg: AlignConfig, det: DetectorParams = DetectorParams(),
                  noise: LshNoiseParams = LshNoiseParams(), read_noise_seed: int = 0,
                  max_threshold: int = 32, threads: int = 1, hashes=None) -> list[VoteProfile]:
    if hashes is None:
        hashes = read_hashes(index, reads, cfg, det, noise, read_noise_seed, threads)

    def one(h):
        return profile_from_hashes(index, h, cfg.backend, max_threshold)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, hashes))
    return [one(h) for h in hashes]


def top3_tally(profile: VoteProfile, threshold: int) -> VoteTally:
    """The three best buckets at ``threshold``, ranked exactly as VoteTally.top ranks."""
    flat = profile.flat(threshold)
    order = np.argsort(-flat, kind="stable")[:3]
    keys = [(sp, b) for sp, c in zip(profile.species, profile.cum) for b in range(c.shape[0])]
    return VoteTally({keys[i]: int(flat[i]) for i in order if flat[i] > 0})


def mapping_results(profiles, reads, cfg: AlignConfig) -> list[MappingResult]:
    return [decide(p.tally(cfg.cam_threshold), cfg, r.read_id, r.truth or None)
            for p, r in zip(profiles, reads)]


def mapping_sweep(profiles, truths, reference_species, thresholds, votes, overlap_slack: int = 1,
                  bucket_size: int = 400, m: int = 10) -> list[SweepRow]:
    """Recall/precision/F1 for every (cam_threshold, votes_min) pair."""
    rows = []
    for t in thresholds:
        tallies = [top3_tally(p, t) for p in profiles]
        for vm in votes:
            cfg = AlignConfig(cam_threshold=min(t, 128), votes_min=vm, m=m, bucket_size=bucket_size)
            res = [decide(tl, cfg) for tl in tallies]
            mt = score(res, truths, reference_species, overlap_slack, bucket_size, m)
            rows.append(SweepRow(t, vm, mt.recall, mt.precision, mt.f1, mt.tp, mt.fp, mt.fn))
    return rows


def detection_votes_matrix(profiles, target: str) -> np.ndarray:
    """Votes for the target's bucket 0, shape ``(n_reads, n_thresholds)``."""
    out = []
    for p in profiles:
        c = p.cum[p.species.index(target)]
        out.append(c[0])
    return np.array(out)


def detection_sweep(profiles, truths, target: str, thresholds, votes) -> list[SweepRow]:
    """Detection metrics on the grid; a read is positive when votes > votes_min."""
    v = detection_votes_matrix(profiles, target)
    positive = np.array([t["species"] == target for t in truths])
    rows = []
    for t in thresholds:
        col = v[:, min(t, v.shape[1] - 1)] if len(v) else np.zeros(0)
        for vm in votes:
            pred = col > vm
            tp = int(np.sum(pred & positive))
            fp = int(np.sum(pred & ~positive))
            fn = int(np.sum(~pred & positive))
            mt = metrics_from_counts(tp, fn, fp)
            rows.append(SweepRow(t, vm, mt.recall, mt.precision, mt.f1, tp, fp, fn))
    return rows


def detection_results(profiles, reads, target: str, cfg: AlignConfig) -> list[MappingResult]:
    out = []
    for p, r in zip(profiles, reads):
        votes = int(p.cum[p.species.index(target)][0, min(cfg.cam_threshold, p.cum[0].shape[1] - 1)])
        out.append(detection_result(r.read_id, votes, cfg.votes_min, target, r.truth or None))
    return out


def abundance_assignments(profiles, threshold: int) -> list[str | None]:
    return [assign_species(p.tally(threshold), p.species) for p in profiles]


def best_row(rows: list[SweepRow]) -> SweepRow:
    """Highest F1.

    A flat optimum is common at high F1, so ties go to the tied point nearest
    the centroid of the tied set (in grid-index units), then to grid order.
    """
    top = max(r.f1 for r in rows)
    tied = [r for r in rows if r.f1 == top]
    ts = sorted({r.cam_threshold for r in rows})
    ss = sorted({r.second for r in rows})
    pos = np.array([(ts.index(r.cam_threshold), ss.index(r.second)) for r in tied], dtype=float)
    dist = np.abs(pos - pos.mean(axis=0)).sum(axis=1)
    return tied[int(np.argmin(dist))]


def is_interior(rows: list[SweepRow], row: SweepRow) -> bool:
    ts = sorted({r.cam_threshold for r in rows})
    ss = sorted({r.second for r in rows})
    return ts[0] < row.cam_threshold < ts[-1] and ss[0] < row.second < ss[-1]


def write_sweep(rows: list[SweepRow], path, second_name: str = "votes_min", header: list[str] = ()) -> None:
    with open(path, "w") as fh:
        for h in header:
            fh.write(f"#{h}\n")
        fh.write(f"#cam_threshold\t{second_name}\trecall\tprecision\tf1\ttp\tfp\tfn\n")
        for r in rows:
            fh.write(f"{r.cam_threshold}\t{r.second}\t{r.recall:.6f}\t{r.precision:.6f}\t{r.f1:.6f}"
                     f"\t{r.tp}\t{r.fp}\t{r.fn}\n")


def write_mapping(results: list[MappingResult], path, header: list[str] = ()) -> None:
    """One row per read: read_id, decision, species, bucket, v1, v2, v3.

    Boundary calls print the bucket pair as ``b-b+1``; unmapped reads use ``*``.
    """
    with open(path, "w") as fh:
        for h in header:
            fh.write(f"#{h}\n")
        fh.write("#read_id\tdecision\tspecies\tbucket\tv1\tv2\tv3\n")
        for r in results:
            if r.decision == "unmapped":
                sp, b = "*", "*"
            elif r.decision == "boundary":
                sp, b = r.species, f"{r.bucket}-{r.bucket2}"
            else:
                sp, b = r.species, str(r.bucket)
            fh.write(f"{r.read_id}\t{r.decision}\t{sp}\t{b}\t{r.v1}\t{r.v2}\t{r.v3}\n")


def read_mapping(path) -> list[MappingResult]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 columns")
            rid, dec, sp, b, v1, v2, v3 = parts
            if dec not in ("mapped", "boundary", "unmapped"):
                raise ValueError(f"{path}:{lineno}: unknown decision {dec!r}")
            b1 = b2 = None
            if dec == "boundary":
                b1, b2 = (int(x) for x in b.split("-"))
            elif dec == "mapped":
                b1 = int(b)
            out.append(MappingResult(rid, dec, None if sp == "*" else sp, b1, b2,
                                     int(v1), int(v2), int(v3)))
    return out


def boundary_errors(detected: EventVector, true_starts, tol: int = 3) -> tuple[int, int, int]:
    """(stays, skips, true boundaries) with boundaries matched within +-tol samples.

    A stay is a detected boundary with no true one nearby (an extra event);
    a skip is a true boundary nobody detected. The leading boundary at 0 is
    not counted on either side.
    """
    db = np.asarray(detected.boundaries)[1:] if len(detected) else np.zeros(0, dtype=np.int64)
    db = db[db > 0]
    tb = np.asarray(true_starts)
    tb = tb[tb > 0]
    if len(tb) == 0 or len(db) == 0:
        return len(db), len(tb), len(tb)
    d = np.abs(tb[:, None] - db[None, :])
    return int(np.sum(d.min(axis=0) > tol)), int(np.sum(d.min(axis=1) > tol)), len(tb)


def segmentation_errors(community: Community, det: DetectorParams = DetectorParams(),
                        max_samples: int | None = None, tol: int = 3) -> dict[str, float]:
    """Stay and skip rates per true event, before and after the difference filter."""
    tot = {"raw": np.zeros(3), "filtered": np.zeros(3)}
    for raw, truth in zip(community.reads, community.truths):
        raw = raw.truncated(max_samples)
        true_starts = truth.boundaries[truth.boundaries < len(raw.samples)]
        ev = detect_events(raw, det)
        tot["raw"] += boundary_errors(ev, true_starts, tol)
        tot["filtered"] += boundary_errors(filter_events(ev, det.diff_threshold), true_starts, tol)
    out = {}
    for k, (st, sk, n) in tot.items():
        out[f"{k}_stay"] = st / n if n else 0.0
        out[f"{k}_skip"] = sk / n if n else 0.0
    return out


# --- desk-scale datasets ---------------------------------------------------------

def virus_fragment(genome: ReferenceSequence, length: int = 78, seed: int = 0,
                   name: str = "virus") -> ReferenceSequence:
    rng = np.random.default_rng(seed)
    start = int(rng.integers(0, len(genome.bases) - length + 1))
    return ReferenceSequence(name, genome.bases[start : start + length])


def detection_dataset(model: PoreModel, n_virus: int = 1000, n_off: int = 1000, seed: int = 0,
                      sim: SimParams = SimParams()):
    """78 bp virus reference plus a shuffled mix of virus and off-target reads.

    The virus fragment comes from a synthetic stand-in for the SARS-CoV-2
    genome; off-target reads are 78 bp windows of a separate random genome.
    """
    genome = random_genome(SARS_COV_2_LENGTH, seed=seed, name="sars-cov-2")
    virus = virus_fragment(genome, 78, seed=seed + 1)
    human = random_genome(200_000, seed=seed + 2, name="human")
    com = simulate_community([(virus, n_virus, replace(sim, read_length=None)),
                              (human, n_off, replace(sim, read_length=78))], model, seed=seed + 3)
    return virus, com


def abundance_dataset(model: PoreModel, n_species: int = 5, per_species: int = 400, seed: int = 0,
                      sim: SimParams = SimParams()):
    refs = []
    for i in range(n_species):
        g = random_genome(50_000, seed=seed + 100 + i, name=f"species{i}")
        refs.append(virus_fragment(g, 78, seed=seed + 200 + i, name=f"species{i}"))
    com = simulate_community([(r, per_species, replace(sim, read_length=None)) for r in refs],
                             model, seed=seed + 3)
    return refs, com


def mapping_dataset(model: PoreModel, n_reads: int = 2000, read_length: int = 900, seed: int = 0,
                    sim: SimParams = SimParams()):
    genome = random_genome(SARS_COV_2_LENGTH, seed=seed, name="sars-cov-2")
    com = simulate_community([(genome, n_reads, replace(sim, read_length=read_length))], model,
                             seed=seed + 3)
    return genome, com


def truths_for(community: Community, max_samples: int | None = None) -> list[dict]:
    """Truth dicts with the number of true events inside the consumed prefix."""
    out = []
    for t in community.truths:
        n = len(t.levels) if max_samples is None else t.events_before(max_samples)
        out.append({"species": t.species, "start": t.start, "length": t.length, "n_events": n})
    return out
