#!/usr/bin/env python3
"""Read mapping against the synthetic 29,903 bp genome, swept over threshold and votes_min."""
import argparse
import time
from pathlib import Path

from memvote.aligner import AlignConfig, build_index
from memvote.cam import DeviceModel
from memvote.experiments import (best_row, is_interior, mapping_dataset, mapping_results, mapping_sweep,
                                 read_profiles, truths_for, write_mapping, write_sweep)
from memvote.sim import synthetic_pore_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reads", type=int, default=2000)
    ap.add_argument("--read-length", type=int, default=450)
    ap.add_argument("--max-samples", type=int, default=4000)
    ap.add_argument("--backend", choices=["digital", "analog"], default="analog")
    ap.add_argument("--variation-stdv", type=float, default=2.5)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    model = synthetic_pore_model()
    genome, com = mapping_dataset(model, n_reads=a.reads, read_length=a.read_length, seed=a.seed)
    cfg = AlignConfig(backend=a.backend, max_samples=a.max_samples)
    idx = build_index([genome], model, cfg, DeviceModel(variation_stdv=a.variation_stdv))
    prof = read_profiles(idx, com.reads, cfg, max_threshold=20, threads=a.threads)
    rows = mapping_sweep(prof, truths_for(com, a.max_samples), [genome.id], range(0, 21), range(1, 16))
    write_sweep(rows, out / "mapping_sweep.tsv")
    best = best_row(rows)
    at = AlignConfig(cam_threshold=best.cam_threshold, votes_min=best.second, backend=a.backend)
    write_mapping(mapping_results(prof, com.reads, at), out / "mapping_reads.tsv")
    print(f"best F1 {best.f1:.4f} (recall {best.recall:.4f}, precision {best.precision:.4f}) at "
          f"T={best.cam_threshold} votes_min={best.second}, interior={is_interior(rows, best)}; "
          f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
