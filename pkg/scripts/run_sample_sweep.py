#!/usr/bin/env python3
"""Best mapping F1 as a function of how many raw samples per read are consumed."""
import argparse
from pathlib import Path

from memvote.aligner import AlignConfig, build_index
from memvote.cam import DeviceModel
from memvote.experiments import best_row, mapping_dataset, mapping_sweep, read_profiles, truths_for
from memvote.sim import synthetic_pore_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--reads", type=int, default=2000)
    ap.add_argument("--samples", default="500,1000,2000,4000,8000")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    model = synthetic_pore_model()
    genome, com = mapping_dataset(model, n_reads=a.reads, read_length=450)
    idx = build_index([genome], model, AlignConfig(backend="analog"), DeviceModel(variation_stdv=2.5))
    with open(out / "sample_sweep.tsv", "w") as fh:
        fh.write("#max_samples\tcam_threshold\tvotes_min\trecall\tprecision\tf1\n")
        for n in (int(x) for x in a.samples.split(",")):
            cfg = AlignConfig(backend="analog", max_samples=n)
            prof = read_profiles(idx, com.reads, cfg, max_threshold=20)
            b = best_row(mapping_sweep(prof, truths_for(com, n), [genome.id], range(0, 21), range(1, 16)))
            fh.write(f"{n}\t{b.cam_threshold}\t{b.second}\t{b.recall:.6f}\t{b.precision:.6f}\t{b.f1:.6f}\n")
            print(f"{n:>5} samples: best F1 {b.f1:.4f} at T={b.cam_threshold} votes_min={b.second}", flush=True)


if __name__ == "__main__":
    main()
