#!/usr/bin/env python3
"""Stay/skip rates of the event detector against simulator truth, before and after filtering."""
import argparse

from memvote.events import DetectorParams
from memvote.experiments import SARS_COV_2_LENGTH, segmentation_errors
from memvote.sim import SimParams, random_genome, simulate_community, synthetic_pore_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reads", type=int, default=200)
    ap.add_argument("--t-short", type=float, default=DetectorParams().t_threshold_short)
    ap.add_argument("--t-long", type=float, default=DetectorParams().t_threshold_long)
    ap.add_argument("--dwell", default="gamma", choices=["gamma", "geometric", "fixed"])
    a = ap.parse_args()
    model = synthetic_pore_model()
    genome = random_genome(SARS_COV_2_LENGTH, seed=0, name="sars-cov-2")
    com = simulate_community([(genome, a.reads, SimParams(read_length=450, dwell=a.dwell))], model, seed=9)
    r = segmentation_errors(com, DetectorParams(t_threshold_short=a.t_short, t_threshold_long=a.t_long),
                            max_samples=4000)
    print(f"detector {a.t_short}/{a.t_long}, {a.dwell} dwell")
    print(f"  unfiltered: stay {100 * r['raw_stay']:.1f}%  skip {100 * r['raw_skip']:.1f}%")
    print(f"  filtered:   stay {100 * r['filtered_stay']:.1f}%  skip {100 * r['filtered_skip']:.1f}%")


if __name__ == "__main__":
    main()
