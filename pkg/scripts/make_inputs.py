#!/usr/bin/env python3
"""Write the synthetic pore model and reference FASTAs used by the experiment scripts."""
import argparse
from pathlib import Path

from memvote.experiments import SARS_COV_2_LENGTH, virus_fragment
from memvote.kmer_model import write_fasta, write_pore_model
from memvote.sim import random_genome, synthetic_pore_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pore_model(synthetic_pore_model(seed=a.seed), out / "model_6mer.tsv")
    genome = random_genome(SARS_COV_2_LENGTH, seed=a.seed, name="sars-cov-2")
    write_fasta([genome], out / "virus_genome.fa")
    write_fasta([virus_fragment(genome, 78, seed=a.seed + 1)], out / "virus_78bp.fa")
    write_fasta([random_genome(200_000, seed=a.seed + 2, name="human")], out / "human.fa")
    refs = []
    for i in range(5):
        g = random_genome(50_000, seed=a.seed + 100 + i, name=f"species{i}")
        refs.append(virus_fragment(g, 78, seed=a.seed + 200 + i, name=f"species{i}"))
    write_fasta(refs, out / "community_5x78bp.fa")
    print(f"wrote inputs to {out}/")


if __name__ == "__main__":
    main()
