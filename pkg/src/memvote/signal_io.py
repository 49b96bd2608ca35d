"""Raw-signal file formats.

Text (any extension other than ``.f32``)::

    #memvote-raw v1
    #read_id<TAB>sample_rate<TAB>samples
    read000000<TAB>4000<TAB>91.204,90.877,...

One read per line; samples are pA with three decimals, comma-separated.

Binary (``<name>.f32`` plus sidecar ``<name>.f32.tsv``): the ``.f32`` file is
every read's samples concatenated as little-endian IEEE-754 float32, no
padding. The sidecar is::

    #memvote-raw-bin v1
    #read_id<TAB>sample_rate<TAB>offset<TAB>count

where ``offset`` and ``count`` are in samples (not bytes).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .events import RawSignal

TEXT_MAGIC = "#memvote-raw v1"
BIN_MAGIC = "#memvote-raw-bin v1"


class FormatError(ValueError):
    pass


def is_binary(path) -> bool:
    return str(path).endswith(".f32")


def write_reads(reads, path) -> None:
    if is_binary(path):
        _write_binary(reads, path)
    else:
        _write_text(reads, path)


def read_reads(path, truth: dict | None = None) -> list[RawSignal]:
    """Load reads; ``truth`` (read_id -> dict, e.g. from a manifest) is attached when given."""
    reads = _read_binary(path) if is_binary(path) else _read_text(path)
    if truth:
        reads = [RawSignal(r.read_id, r.samples, r.sample_rate, dict(truth.get(r.read_id, {})))
                 for r in reads]
    return reads


def _fmt_rate(rate: float) -> str:
    return str(int(rate)) if float(rate).is_integer() else repr(float(rate))


def _write_text(reads, path) -> None:
    with open(path, "w") as fh:
        fh.write(TEXT_MAGIC + "\n")
        fh.write("#read_id\tsample_rate\tsamples\n")
        for r in reads:
            vals = ",".join(np.char.mod("%.3f", r.samples))
            fh.write(f"{r.read_id}\t{_fmt_rate(r.sample_rate)}\t{vals}\n")


def _read_text(path) -> list[RawSignal]:
    out = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first == "":
            return out
        if first != TEXT_MAGIC:
            raise FormatError(f"{path}: missing '{TEXT_MAGIC}' header")
        for lineno, line in enumerate(fh, 2):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                rate = float(parts[1])
                samples = np.array(parts[2].split(","), dtype=np.float64)
                out.append(RawSignal(parts[0], samples, rate))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def _write_binary(reads, path) -> None:
    path = Path(path)
    offset = 0
    with open(path, "wb") as data, open(str(path) + ".tsv", "w") as side:
        side.write(BIN_MAGIC + "\n")
        side.write("#read_id\tsample_rate\toffset\tcount\n")
        for r in reads:
            data.write(np.asarray(r.samples, dtype="<f4").tobytes())
            side.write(f"{r.read_id}\t{_fmt_rate(r.sample_rate)}\t{offset}\t{len(r.samples)}\n")
            offset += len(r.samples)


def _read_binary(path) -> list[RawSignal]:
    side = Path(str(path) + ".tsv")
    if not side.exists():
        raise FormatError(f"{path}: sidecar {side} not found")
    data = np.fromfile(path, dtype="<f4")
    out = []
    with open(side) as fh:
        if fh.readline().rstrip("\n") != BIN_MAGIC:
            raise FormatError(f"{side}: missing '{BIN_MAGIC}' header")
        for lineno, line in enumerate(fh, 2):
            if line.startswith("#") or not line.strip():
                continue
            try:
                rid, rate, off, cnt = line.rstrip("\n").split("\t")
                off, cnt = int(off), int(cnt)
                rate = float(rate)
            except ValueError:
                raise FormatError(f"{side}:{lineno}: malformed row") from None
            if off < 0 or off + cnt > data.size:
                raise FormatError(f"{side}:{lineno}: samples [{off}, {off + cnt}) beyond data end")
            out.append(RawSignal(rid, data[off : off + cnt].astype(np.float64), rate))
    return out
