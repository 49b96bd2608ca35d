#!/usr/bin/env python3
"""Best mapping F1 against CAM conductance variation; read hashes are computed once."""
import argparse
from pathlib import Path

from memvote.aligner import AlignConfig, build_index
from memvote.cam import DeviceModel
from memvote.experiments import best_row, mapping_dataset, mapping_sweep, read_hashes, read_profiles, truths_for
from memvote.sim import synthetic_pore_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--reads", type=int, default=2000)
    ap.add_argument("--levels", default="0,2.5,5,7.5,10")
    ap.add_argument("--write-tolerance", type=float, default=5.0,
                    help="programming clip in uS; raise it to model arrays without write-and-verify")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    model = synthetic_pore_model()
    genome, com = mapping_dataset(model, n_reads=a.reads, read_length=450)
    cfg = AlignConfig(backend="analog", max_samples=4000)
    truths = truths_for(com, 4000)
    hashes = None
    with open(out / "variation_sweep.tsv", "w") as fh:
        fh.write(f"#write_tolerance={a.write_tolerance}\n")
        fh.write("#variation_stdv\tcam_threshold\tvotes_min\trecall\tprecision\tf1\n")
        for s in (float(x) for x in a.levels.split(",")):
            idx = build_index([genome], model, cfg, DeviceModel(variation_stdv=s, write_tolerance=a.write_tolerance))
            if hashes is None:
                hashes = read_hashes(idx, com.reads, cfg)
            prof = read_profiles(idx, com.reads, cfg, max_threshold=20, hashes=hashes)
            b = best_row(mapping_sweep(prof, truths, [genome.id], range(0, 21), range(1, 16)))
            fh.write(f"{s}\t{b.cam_threshold}\t{b.second}\t{b.recall:.6f}\t{b.precision:.6f}\t{b.f1:.6f}\n")
            print(f"stdv {s:>4} uS: best F1 {b.f1:.4f} at T={b.cam_threshold} votes_min={b.second}", flush=True)


if __name__ == "__main__":
    main()
