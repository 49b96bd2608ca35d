"""Simulated memristor LSH + CAM fuzzy seed-and-vote for raw nanopore signals."""

__version__ = "0.1.0"
