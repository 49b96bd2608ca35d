"""Pore model tables, FASTA references and expected-level encoding."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

BASES = "ACGT"


class ParseError(ValueError):
    """Raised for malformed pore-model or FASTA input."""


@dataclass(frozen=True)
class PoreModel:
    """k-mer -> expected current level (pA)."""

    k: int
    levels: dict[str, float]
    level_stdv: dict[str, float] = field(default_factory=dict)
    global_mean: float = 0.0
    global_stdv: float = 0.0
    incomplete: bool = False

    @classmethod
    def from_levels(cls, levels: dict[str, float], level_stdv: dict[str, float] | None = None) -> "PoreModel":
        if not levels:
            raise ParseError("pore model has no k-mers")
        ks = {len(km) for km in levels}
        if len(ks) != 1:
            raise ParseError(f"mixed k-mer lengths in pore model: {sorted(ks)}")
        k = ks.pop()
        for km, lv in levels.items():
            if set(km) - set(BASES):
                raise ParseError(f"k-mer {km!r} has characters outside ACGT")
            if not 0.0 < lv < 300.0:
                raise ParseError(f"level {lv} for {km} outside (0, 300) pA")
        vals = np.fromiter(levels.values(), dtype=np.float64)
        return cls(
            k=k,
            levels=dict(levels),
            level_stdv=dict(level_stdv or {}),
            global_mean=float(vals.mean()),
            global_stdv=float(vals.std()),
            incomplete=len(levels) < 4**k,
        )

    def __getitem__(self, kmer: str) -> float:
        return self.levels[kmer]

    @cached_property
    def lookup_array(self) -> np.ndarray:
        """Dense array indexed by the base-4 code of each k-mer (NaN where absent)."""
        table = np.full(4**self.k, np.nan)
        for km, lv in self.levels.items():
            table[kmer_code(km)] = lv
        return table


@dataclass(frozen=True)
class ReferenceSequence:
    id: str
    bases: str


@dataclass(frozen=True)
class ExpectedEventVector:
    values: np.ndarray
    source_id: str
    offsets: np.ndarray  # base offset of the k-mer behind each value


def kmer_code(kmer: str) -> int:
    code = 0
    for b in kmer:
        code = code * 4 + BASES.index(b)
    return code


def all_kmers(k: int):
    return ("".join(p) for p in itertools.product(BASES, repeat=k))


def load_pore_model(path) -> PoreModel:
    """Read an ONT-style TSV pore model.

    The header must name a ``kmer`` and a ``level_mean`` column; ``level_stdv``
    is picked up when present and any other columns are ignored.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ParseError(f"{path}: empty pore model")
    lineno, header = rows[0]
    cols = [c.strip() for c in header.split("\t")]
    if "kmer" not in cols or "level_mean" not in cols:
        raise ParseError(f"{path}:{lineno}: header must contain 'kmer' and 'level_mean'")
    ik, im = cols.index("kmer"), cols.index("level_mean")
    isd = cols.index("level_stdv") if "level_stdv" in cols else None

    levels: dict[str, float] = {}
    stdv: dict[str, float] = {}
    for lineno, ln in rows[1:]:
        parts = ln.split("\t")
        if len(parts) < len(cols):
            raise ParseError(f"{path}:{lineno}: expected {len(cols)} columns, got {len(parts)}")
        km = parts[ik].strip().upper()
        try:
            lv = float(parts[im])
            sd = float(parts[isd]) if isd is not None else None
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if km in levels:
            raise ParseError(f"{path}:{lineno}: duplicate k-mer {km}")
        if levels and len(km) != len(next(iter(levels))):
            raise ParseError(f"{path}:{lineno}: k-mer {km} length differs from first row")
        levels[km] = lv
        if sd is not None:
            stdv[km] = sd
    if not levels:
        raise ParseError(f"{path}: pore model has a header but no rows")
    try:
        return PoreModel.from_levels(levels, stdv)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_pore_model(model: PoreModel, path) -> None:
    with open(path, "w") as fh:
        if model.level_stdv:
            fh.write("kmer\tlevel_mean\tlevel_stdv\n")
            for km, lv in model.levels.items():
                fh.write(f"{km}\t{lv:.4f}\t{model.level_stdv.get(km, 0.0):.4f}\n")
        else:
            fh.write("kmer\tlevel_mean\n")
            for km, lv in model.levels.items():
                fh.write(f"{km}\t{lv:.4f}\n")


def parse_fasta(path, n_policy: str = "reject", min_length: int = 1) -> list[ReferenceSequence]:
    """Parse a (multi-record) FASTA file.

    ``n_policy`` is ``"reject"`` (raise on N) or ``"split"``, which breaks a
    record at runs of N into contigs named ``<id>_<i>``; contigs shorter than
    ``min_length`` are dropped.
    """
    if n_policy not in ("reject", "split"):
        raise ValueError(f"unknown N policy {n_policy!r}")
    records: list[tuple[str, list[str]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                name = line[1:].split()[0] if line[1:].strip() else ""
                if not name:
                    raise ParseError(f"{path}:{lineno}: record without an id")
                records.append((name, []))
            elif not records:
                raise ParseError(f"{path}:{lineno}: sequence before first header")
            else:
                records[-1][1].append(line.upper())

    out: list[ReferenceSequence] = []
    for name, chunks in records:
        seq = "".join(chunks)
        if not seq:
            raise ParseError(f"record {name!r} has an empty sequence")
        for off, ch in enumerate(seq):
            if ch not in "ACGTN":
                raise ParseError(f"record {name!r}: invalid base {ch!r} at offset {off}")
        if "N" not in seq:
            out.append(ReferenceSequence(name, seq))
        elif n_policy == "reject":
            raise ParseError(f"record {name!r}: ambiguous base 'N' at offset {seq.index('N')}")
        else:
            contigs = [c for c in seq.split("N") if len(c) >= min_length]
            out.extend(ReferenceSequence(f"{name}_{i}", c) for i, c in enumerate(contigs))
    return out


def write_fasta(refs, path, width: int = 80) -> None:
    with open(path, "w") as fh:
        for ref in refs:
            fh.write(f">{ref.id}\n")
            for i in range(0, len(ref.bases), width):
                fh.write(ref.bases[i : i + width] + "\n")


def encode_bases(bases: str) -> np.ndarray:
    lut = np.full(256, 255, dtype=np.uint8)
    for i, b in enumerate(BASES):
        lut[ord(b)] = i
    return lut[np.frombuffer(bases.encode("ascii"), dtype=np.uint8)]


def kmer_codes(bases: str, k: int) -> np.ndarray:
    """Base-4 code of every k-mer window, in order."""
    digits = encode_bases(bases).astype(np.int64)
    n = len(digits) - k + 1
    codes = np.zeros(n, dtype=np.int64)
    for j in range(k):
        codes = codes * 4 + digits[j : j + n]
    return codes


def encode_reference(ref: ReferenceSequence, model: PoreModel) -> ExpectedEventVector:
    """Expected current for every k-mer of ``ref``; length is ``len(bases) - k + 1``."""
    k = model.k
    if len(ref.bases) < k:
        raise ValueError(f"reference {ref.id!r} shorter than k={k}")
    bad = set(ref.bases) - set(BASES)
    if bad:
        raise ValueError(f"reference {ref.id!r} contains non-ACGT bases {sorted(bad)}")
    values = model.lookup_array[kmer_codes(ref.bases, k)]
    missing = np.flatnonzero(np.isnan(values))
    if missing.size:
        p = int(missing[0])
        raise KeyError(f"k-mer {ref.bases[p:p + k]} at position {p} of {ref.id!r} not in pore model")
    return ExpectedEventVector(values=values, source_id=ref.id, offsets=np.arange(len(values)))
