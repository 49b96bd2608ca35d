"""``memvote`` command line: simulate, index, map, detect, abundance, sweep, eval."""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields, replace

import tomli

from . import experiments as ex
from .aligner import (AlignConfig, IndexVersionError, ReferenceIndex, abundance_from_assignments,
                      build_index, load_index, save_index, score)
from .cam import DeviceModel
from .events import DetectorParams
from .kmer_model import ParseError, load_pore_model, parse_fasta
from .lsh import ConductanceDist, LshNoiseParams
from .signal_io import FormatError, read_reads, write_reads
from .sim import SimParams, read_manifest, simulate_community, write_manifest

EXIT_OK, EXIT_INPUT, EXIT_VERSION, EXIT_INTERNAL = 0, 2, 3, 4

SEED_KEYS = ("seed_simulator", "seed_crossbar", "seed_cam", "seed_read_noise")
PATH_KEYS = ("reference", "model", "reads", "index", "out", "truth")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    align: AlignConfig = field(default_factory=AlignConfig)
    device: DeviceModel = field(default_factory=DeviceModel)
    detector: DetectorParams = field(default_factory=DetectorParams)
    sim: SimParams = field(default_factory=SimParams)
    dist: ConductanceDist = field(default_factory=ConductanceDist)
    noise: LshNoiseParams = field(default_factory=LshNoiseParams)
    seed_simulator: int = 0
    seed_crossbar: int = 0
    seed_cam: int = 0
    seed_read_noise: int = 0
    threads: int = 1
    paths: dict = field(default_factory=dict)

    def seed_line(self) -> str:
        return ("seeds simulator={} crossbar={} cam={} read_noise={}"
                .format(self.seed_simulator, self.seed_crossbar, self.seed_cam, self.seed_read_noise))


# flat key -> sub-config attribute; a key shared by two parts (diff_threshold) sets both
_SECTIONS = {"align": AlignConfig, "device": DeviceModel, "detector": DetectorParams,
             "sim": SimParams, "noise": LshNoiseParams}
_DIST_KEYS = {"conductance_dist": "kind", "conductance_median": "median",
              "conductance_sigma_ln": "sigma_ln", "conductance_max": "g_max"}
_EXCLUDED = {("sim", "rng_seed")}


def _key_map() -> dict[str, list[tuple[str, str]]]:
    out: dict[str, list[tuple[str, str]]] = {}
    for sec, cls in _SECTIONS.items():
        for f in fields(cls):
            if (sec, f.name) not in _EXCLUDED:
                out.setdefault(f.name, []).append((sec, f.name))
    for key, attr in _DIST_KEYS.items():
        out[key] = [("dist", attr)]
    return out


KEY_MAP = _key_map()


def apply_settings(cfg: RunConfig, settings: dict, origin: str) -> RunConfig:
    """Return ``cfg`` with flat ``settings`` applied; unknown keys and bad values raise InputError."""
    parts = {sec: {} for sec in list(_SECTIONS) + ["dist"]}
    top = {}
    for key, value in settings.items():
        if key in KEY_MAP:
            for sec, attr in KEY_MAP[key]:
                parts[sec][attr] = value
        elif key in SEED_KEYS or key == "threads":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise InputError(f"{origin}: {key} must be a non-negative integer")
            top[key] = value
        elif key in PATH_KEYS:
            if not isinstance(value, str):
                raise InputError(f"{origin}: {key} must be a string path")
            cfg.paths = {**cfg.paths, key: value}
        else:
            raise InputError(f"{origin}: unknown config key {key!r}")
    try:
        for sec, kw in parts.items():
            if kw:
                current = getattr(cfg, sec)
                for attr, value in kw.items():
                    _check_type(current, attr, value, origin)
                setattr(cfg, sec, replace(current, **kw))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{origin}: {exc}") from None
    for key, value in top.items():
        setattr(cfg, key, value)
    if cfg.threads < 1:
        raise InputError(f"{origin}: threads must be >= 1")
    return cfg


def _check_type(obj, attr: str, value, origin: str) -> None:
    default = getattr(obj, attr)
    ok = True
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif default is None:
        ok = isinstance(value, int) and not isinstance(value, bool)
    if not ok:
        raise InputError(f"{origin}: {attr} has the wrong type ({type(value).__name__})")


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise InputError(f"{path}: config must be flat (found table {nested[0]!r})")
    return apply_settings(RunConfig(), data, str(path))


def _parse_int_list(text: str) -> list[int]:
    """``"0:32"`` (inclusive range) or ``"500,1000"``."""
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            vals = list(range(lo, hi + 1))
        else:
            vals = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise InputError(f"bad integer list {text!r}") from None
    if not vals:
        raise InputError(f"empty grid {text!r}")
    return vals


# --- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memvote", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat TOML config; flags override it")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--threads", type=int)
        for s in SEED_KEYS:
            sp.add_argument("--" + s.replace("_", "-"), type=int, dest=s)
        sp.add_argument("--backend", choices=["analog", "digital"])
        sp.add_argument("--cam-threshold", type=int)
        sp.add_argument("--votes-min", type=int)
        sp.add_argument("--max-samples", type=int)
        sp.add_argument("--variation-stdv", type=float)
        sp.add_argument("--read-noise-stdv", type=float)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (TOML value syntax)")
        return sp

    s = common(sub.add_parser("simulate", help="simulate raw reads from references"))
    s.add_argument("--reference", nargs="+", help="FASTA file(s)")
    s.add_argument("--model", help="pore model TSV")
    s.add_argument("--n-reads", type=int, nargs="+", required=True, help="reads per FASTA file")
    s.add_argument("--read-length", type=int, nargs="+", help="bp per FASTA file (0 = whole record)")
    s.add_argument("--manifest", help="truth manifest path (default: <out>.manifest.tsv)")

    s = common(sub.add_parser("index", help="build a CAM index"))
    s.add_argument("--reference", nargs="+")
    s.add_argument("--model")

    for name, text in (("map", "map reads to buckets"), ("detect", "single-bucket detection"),
                       ("abundance", "per-read species assignment")):
        s = common(sub.add_parser(name, help=text))
        s.add_argument("--index")
        s.add_argument("--reads")
        s.add_argument("--truth", help="manifest with simulator truth")

    s = common(sub.add_parser("sweep", help="metric grid over CAM threshold x votes or samples"))
    s.add_argument("--index")
    s.add_argument("--reads")
    s.add_argument("--truth", required=True)
    s.add_argument("--mode", choices=["map", "detect"], default="map")
    s.add_argument("--thresholds", default="0:32")
    s.add_argument("--votes", default="1:15")
    s.add_argument("--samples", help="e.g. 500,1000,2000,4000,8000 (replaces the votes axis)")

    s = common(sub.add_parser("eval", help="score a mapping TSV against a manifest"))
    s.add_argument("--results", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--index", help="take bucket size, m and reference species from this index")
    s.add_argument("--overlap-slack", type=int, default=1)
    return p


_FLAG_KEYS = ("backend", "cam_threshold", "votes_min", "max_samples", "variation_stdv",
              "read_noise_stdv", "threads") + SEED_KEYS


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            overrides[key.strip()] = tomli.loads(f"v = {value}")["v"]
        except tomli.TOMLDecodeError:
            overrides[key.strip()] = value
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    for key in PATH_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v if isinstance(v, str) else ",".join(v)
    return apply_settings(cfg, overrides, "command line")


def _need(cfg: RunConfig, key: str) -> str:
    if key not in cfg.paths:
        raise InputError(f"--{key} is required")
    return cfg.paths[key]


def _open_out(cfg: RunConfig):
    path = cfg.paths.get("out")
    return open(path, "w") if path else None


def _header(cfg: RunConfig, command: str) -> list[str]:
    return [f"memvote {command}", cfg.seed_line()]


def _index_align(index: ReferenceIndex, cfg: RunConfig) -> AlignConfig:
    """Structural fields come from the index; search-time fields from the run config."""
    stored = index.config.get("align", {})
    keep = {k: stored[k] for k in ("m", "hash_bits", "bucket_size", "center_seeds") if k in stored}
    return replace(cfg.align, **keep)


def _load_reads(cfg: RunConfig, truth=None):
    return read_reads(_need(cfg, "reads"), truth)


def _load_truth(cfg: RunConfig):
    path = cfg.paths.get("truth")
    return read_manifest(path) if path else None


def _print(lines: list[str]) -> None:
    for line in lines:
        print(line if line.startswith("#") else "#" + line)


# --- commands ----------------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    files = _need(cfg, "reference").split(",")
    model = load_pore_model(_need(cfg, "model"))
    out = _need(cfg, "out")
    counts = args.n_reads
    lengths = args.read_length or [cfg.sim.read_length or 0] * len(files)
    if len(counts) != len(files) or len(lengths) != len(files):
        raise InputError("--n-reads/--read-length need one value per reference file")
    specs = []
    for path, n, length in zip(files, counts, lengths):
        refs = parse_fasta(path)
        per = [n // len(refs) + (i < n % len(refs)) for i in range(len(refs))]
        for ref, c in zip(refs, per):
            specs.append((ref, c, replace(cfg.sim, read_length=length or None)))
    com = simulate_community(specs, model, seed=cfg.seed_simulator)
    write_reads(com.reads, out)
    manifest = args.manifest or out + ".manifest.tsv"
    write_manifest(com, manifest)
    _print(_header(cfg, "simulate") + [f"reads {len(com.reads)}", f"manifest {manifest}"])
    return EXIT_OK


def cmd_index(args, cfg: RunConfig) -> int:
    refs = []
    for path in _need(cfg, "reference").split(","):
        refs.extend(parse_fasta(path))
    model = load_pore_model(_need(cfg, "model"))
    index = build_index(refs, model, cfg.align, cfg.device, cfg.seed_crossbar, cfg.seed_cam, cfg.dist)
    save_index(index, _need(cfg, "out"))
    lines = _header(cfg, "index") + ["species\trows\tbuckets"]
    lines += [f"{sp.species}\t{sp.cam.n_rows}\t{sp.n_buckets}" for sp in index.species]
    _print(lines)
    return EXIT_OK


def _profiles(index, reads, align, cfg, max_threshold):
    return ex.read_profiles(index, reads, align, cfg.detector, cfg.noise, cfg.seed_read_noise,
                            max_threshold, cfg.threads)


def cmd_map(args, cfg: RunConfig) -> int:
    index = load_index(_need(cfg, "index"))
    align = _index_align(index, cfg)
    truth = _load_truth(cfg)
    reads = _load_reads(cfg, truth)
    profiles = _profiles(index, reads, align, cfg, align.cam_threshold)
    results = ex.mapping_results(profiles, reads, align)
    head = _header(cfg, "map") + [f"backend {align.backend} cam_threshold {align.cam_threshold} "
                                  f"votes_min {align.votes_min} max_samples {align.max_samples}"]
    ex.write_mapping(results, _need(cfg, "out"), head)
    summary = head + [f"reads {len(results)}", f"mapped {sum(r.is_mapped for r in results)}"]
    if truth is not None:
        summary += _metric_lines(score(results, _truth_list(reads, truth), index.species_ids,
                                       bucket_size=align.bucket_size, m=align.m))
    _print(summary)
    return EXIT_OK


def _truth_list(reads, truth):
    out = []
    for r in reads:
        if r.read_id not in truth:
            raise InputError(f"read {r.read_id} missing from truth manifest")
        out.append(truth[r.read_id])
    return out


def _metric_lines(mt) -> list[str]:
    return ["recall\tprecision\tf1\ttp\tfp\tfn",
            f"{mt.recall:.6f}\t{mt.precision:.6f}\t{mt.f1:.6f}\t{mt.tp}\t{mt.fp}\t{mt.fn}"]


def cmd_detect(args, cfg: RunConfig) -> int:
    index = load_index(_need(cfg, "index"))
    target = index.species[0]
    if len(index.species) != 1 or target.n_buckets != 1:
        raise InputError("detection needs an index with one single-bucket reference")
    align = _index_align(index, cfg)
    truth = _load_truth(cfg)
    reads = _load_reads(cfg, truth)
    profiles = _profiles(index, reads, align, cfg, align.cam_threshold)
    results = ex.detection_results(profiles, reads, target.species, align)
    head = _header(cfg, "detect") + [f"backend {align.backend} cam_threshold {align.cam_threshold} "
                                     f"votes_min {align.votes_min} max_samples {align.max_samples}"]
    ex.write_mapping(results, _need(cfg, "out"), head)
    summary = head + [f"reads {len(results)}", f"detected {sum(r.is_mapped for r in results)}"]
    if truth is not None:
        summary += _metric_lines(score(results, _truth_list(reads, truth), [target.species],
                                       bucket_size=align.bucket_size, m=align.m))
    _print(summary)
    return EXIT_OK


def cmd_abundance(args, cfg: RunConfig) -> int:
    index = load_index(_need(cfg, "index"))
    if len(index.species) < 2:
        raise InputError("abundance needs an index with at least two species")
    align = _index_align(index, cfg)
    truth = _load_truth(cfg)
    reads = _load_reads(cfg, truth)
    profiles = _profiles(index, reads, align, cfg, align.cam_threshold)
    assigned = ex.abundance_assignments(profiles, align.cam_threshold)
    species = index.species_ids
    true_sp = [t["species"] for t in _truth_list(reads, truth)] if truth is not None else None
    res = abundance_from_assignments(species, assigned, true_sp)
    head = _header(cfg, "abundance") + [f"backend {align.backend} cam_threshold {align.cam_threshold}"]
    with open(_need(cfg, "out"), "w") as fh:
        for h in head:
            fh.write(f"#{h}\n")
        fh.write("#read_id\tspecies\n")
        for r, a in zip(reads, assigned):
            fh.write(f"{r.read_id}\t{a or '*'}\n")
    summary = head + [f"reads {len(reads)}"]
    if res.error:
        summary.append(f"error {res.error}")
    else:
        summary.append("species\tabundance")
        summary += [f"{s}\t{res.abundance[s]:.6f}" for s in species]
    if res.confusion is not None:
        summary.append(f"accuracy\t{res.accuracy:.6f}")
        summary.append("confusion\t" + "\t".join(species + ["unclassified"]))
        for s, row in zip(species, res.confusion):
            summary.append(f"{s}\t" + "\t".join(str(int(x)) for x in row))
    _print(summary)
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    index = load_index(_need(cfg, "index"))
    align = _index_align(index, cfg)
    truth = _load_truth(cfg)
    reads = _load_reads(cfg, truth)
    thresholds = _parse_int_list(args.thresholds)
    if min(thresholds) < 0:
        raise InputError("thresholds must be >= 0")
    truths = _truth_list(reads, truth)
    target = index.species[0].species

    def grid(profiles, votes):
        if args.mode == "detect":
            return ex.detection_sweep(profiles, truths, target, thresholds, votes)
        return ex.mapping_sweep(profiles, truths, index.species_ids, thresholds, votes,
                                bucket_size=align.bucket_size, m=align.m)

    tmax = max(thresholds)
    if args.samples:
        rows = []
        for n in _parse_int_list(args.samples):
            a = replace(align, max_samples=n)
            profiles = _profiles(index, reads, a, cfg, tmax)
            rows += [replace(r, second=n) for r in grid(profiles, [align.votes_min])]
        rows.sort(key=lambda r: (r.cam_threshold, r.second))
        second = "max_samples"
    else:
        profiles = _profiles(index, reads, align, cfg, tmax)
        rows = grid(profiles, _parse_int_list(args.votes))
        second = "votes_min"
    head = _header(cfg, f"sweep {args.mode}") + [f"backend {align.backend} max_samples {align.max_samples}"]
    ex.write_sweep(rows, _need(cfg, "out"), second, head)
    best = ex.best_row(rows)
    _print(head + [f"grid_points {len(rows)}",
                   f"best cam_threshold {best.cam_threshold} {second} {best.second} f1 {best.f1:.6f}",
                   f"interior {'yes' if ex.is_interior(rows, best) else 'no'}"])
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    results = ex.read_mapping(args.results)
    truth = read_manifest(args.truth)
    align = cfg.align
    species = None
    if cfg.paths.get("index"):
        index = load_index(cfg.paths["index"])
        align = _index_align(index, cfg)
        species = index.species_ids
    truths = []
    for r in results:
        if r.read_id not in truth:
            raise InputError(f"read {r.read_id} missing from truth manifest")
        truths.append(truth[r.read_id])
    if species is None:
        species = sorted({r.species for r in results if r.species})
    mt = score(results, truths, species, args.overlap_slack, align.bucket_size, align.m)
    lines = _header(cfg, "eval") + [f"reads {len(results)}"] + _metric_lines(mt)
    out = _open_out(cfg)
    if out:
        with out:
            out.writelines(f"#{x}\n" if i < len(lines) - 1 else x + "\n" for i, x in enumerate(lines))
    _print(lines)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "index": cmd_index, "map": cmd_map, "detect": cmd_detect,
            "abundance": cmd_abundance, "sweep": cmd_sweep, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except IndexVersionError as exc:
        print(f"memvote: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except FileNotFoundError as exc:
        print(f"memvote: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ParseError, FormatError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"memvote: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - anything else is a bug
        print(f"memvote: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
