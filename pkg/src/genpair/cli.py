"""Command-line surface: index build/inspect, map, simulate, stats.

Exit codes: 0 success, 1 usage error, 2 data error. Flag defaults can be
overridden with GENPAIR_* environment variables; explicit flags win over the
environment, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import gzip
import json
import os
import sys
from typing import Callable, Optional

from . import __version__
from .dpalign import DpConfig
from .errors import GenPairError
from .index import DEFAULT_FILTER_THRESHOLD, SeedMap, build, index_stats, load, save
from .lightalign import ScoringScheme
from .mapping import MapConfig
from .pipeline import DEFAULT_BATCH_SIZE, run
from .seq import Reference, parse_fasta, parse_fastq_pair
from .seeding import SeedConfig
from .simulate import SimConfig, write_simulated
from .stats import observation_report, write_cdf_csv

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _env(name: str, default, cast: Callable = int):
    raw = os.environ.get(f"GENPAIR_{name}")
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        print(f"genpair: warning: ignoring invalid GENPAIR_{name}={raw!r}", file=sys.stderr)
        return default


def _build_parser() -> _Parser:
    p = _Parser(prog="genpair", description=__doc__)
    p.add_argument("--version", action="version", version=f"genpair {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build or inspect a seed index")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)

    p_build = index_sub.add_parser("build", help="build an index from a FASTA reference")
    p_build.add_argument("-r", "--reference", required=True, help="reference FASTA (optionally gzipped)")
    p_build.add_argument("-o", "--output", required=True, help="output index path")
    p_build.add_argument("--seed-len", type=int, default=_env("SEED_LEN", 50))
    p_build.add_argument("--hash-bits", type=int, default=_env("HASH_BITS", 28))
    p_build.add_argument("--hash-seed", type=int, default=_env("HASH_SEED", 0))
    p_build.add_argument(
        "--filter-threshold", type=int,
        default=_env("FILTER_THRESHOLD", DEFAULT_FILTER_THRESHOLD),
    )

    p_inspect = index_sub.add_parser("inspect", help="print index header and statistics")
    p_inspect.add_argument("index", help="index file")

    p_map = sub.add_parser("map", help="map paired FASTQ reads to SAM")
    p_map.add_argument("-x", "--index", required=True)
    p_map.add_argument("-r", "--reference", required=True, help="reference FASTA matching the index")
    p_map.add_argument("-1", "--fastq1", required=True)
    p_map.add_argument("-2", "--fastq2", required=True)
    p_map.add_argument("-o", "--output", required=True, help="output SAM path, '-' for stdout")
    p_map.add_argument("--delta", type=int, default=_env("DELTA", 500))
    p_map.add_argument("--max-candidates", type=int, default=_env("MAX_CANDIDATES", 16))
    p_map.add_argument("--threads", type=int, default=_env("THREADS", 1))
    p_map.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    p_map.add_argument("--residual-out", metavar="PREFIX", default=None,
                       help="write unmappable pairs to PREFIX_{1,2}.fastq.gz")
    p_map.add_argument("--cigar", choices=("eq", "m"), default="eq",
                       help="extended =/X CIGARs (eq) or legacy M (m)")
    p_map.add_argument("--seed-len", type=int, default=None,
                       help="verify the index was built with this seed length")
    p_map.add_argument("--hash-bits", type=int, default=None)
    p_map.add_argument("--hash-seed", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="generate synthetic read pairs with truth")
    p_sim.add_argument("-r", "--reference", required=True)
    p_sim.add_argument("-n", "--pairs", required=True, type=int)
    p_sim.add_argument("-o", "--output", required=True, metavar="PREFIX",
                       help="write PREFIX_{1,2}.fastq and PREFIX_truth.tsv")
    p_sim.add_argument("--error-rate", type=float, default=0.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--read-len", type=int, default=150)
    p_sim.add_argument("--insert-mean", type=float, default=350.0)
    p_sim.add_argument("--insert-sd", type=float, default=50.0)
    p_sim.add_argument("--gzip", action="store_true", help="gzip the FASTQ outputs")

    p_stats = sub.add_parser("stats", help="dataset measurement report")
    p_stats.add_argument("-x", "--index", required=True)
    p_stats.add_argument("-r", "--reference", required=True)
    p_stats.add_argument("-1", "--fastq1", required=True)
    p_stats.add_argument("-2", "--fastq2", required=True)
    p_stats.add_argument("-o", "--output", required=True, help="JSON report path, '-' for stdout")
    p_stats.add_argument("--cdf-csv", default=None, help="also write the score CDF as CSV")
    p_stats.add_argument("--delta", type=int, default=_env("DELTA", 500))
    p_stats.add_argument("--max-candidates", type=int, default=_env("MAX_CANDIDATES", 16))

    return p


def _load_reference_checked(path: str, smap: SeedMap) -> Reference:
    ref = parse_fasta(path)
    if not smap.ref_meta.matches_reference(ref):
        raise GenPairError(
            f"reference {path!r} does not match the sequences recorded in the index"
        )
    return ref


def _check_index_flags(args, smap: SeedMap) -> None:
    checks = (
        ("seed-len", args.seed_len, smap.cfg.seed_len),
        ("hash-bits", args.hash_bits, smap.cfg.hash_bits),
        ("hash-seed", args.hash_seed, smap.cfg.hash_seed),
    )
    for flag, wanted, actual in checks:
        if wanted is not None and wanted != actual:
            raise GenPairError(
                f"index was built with --{flag} {actual}, not {wanted}"
            )


def _cmd_index_build(args) -> int:
    cfg = SeedConfig(seed_len=args.seed_len, hash_bits=args.hash_bits, hash_seed=args.hash_seed)
    ref = parse_fasta(args.reference)
    smap = build(ref, cfg, filter_threshold=args.filter_threshold)
    _with_cleanup([args.output], lambda: save(smap, args.output))
    stats = index_stats(smap)
    print(
        f"indexed {stats['total_locations']} locations in {stats['buckets_nonempty']} buckets "
        f"({stats['filtered_bucket_count']} buckets filtered at threshold {args.filter_threshold})",
        file=sys.stderr,
    )
    return 0


def _cmd_index_inspect(args) -> int:
    smap = load(args.index)
    info = {
        "seed_len": smap.cfg.seed_len,
        "hash_bits": smap.cfg.hash_bits,
        "hash_seed": smap.cfg.hash_seed,
        "filter_threshold": smap.filter_threshold,
        "sequences": [
            {"name": n, "length": l}
            for n, l in zip(smap.ref_meta.names, smap.ref_meta.lengths)
        ],
        "stats": index_stats(smap),
    }
    json.dump(info, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_map(args) -> int:
    smap = load(args.index)
    _check_index_flags(args, smap)
    ref = _load_reference_checked(args.reference, smap)
    mapcfg = MapConfig(delta=args.delta, max_pair_candidates=args.max_candidates)
    scheme = ScoringScheme()
    dpcfg = DpConfig(scheme=scheme)
    pg_cl = (
        f"map -x {args.index} -1 {args.fastq1} -2 {args.fastq2} "
        f"--delta {args.delta} --max-candidates {args.max_candidates} --cigar {args.cigar}"
    )

    outputs = []
    if args.output != "-":
        outputs.append(args.output)
    if args.residual_out:
        outputs += [args.residual_out + "_1.fastq.gz", args.residual_out + "_2.fastq.gz"]

    def go():
        pairs = parse_fastq_pair(args.fastq1, args.fastq2)
        if args.output == "-":
            stats = run(
                pairs, smap, ref, mapcfg, scheme, dpcfg, sys.stdout,
                residual_prefix=args.residual_out, threads=args.threads,
                batch_size=args.batch_size, cigar_mode=args.cigar, pg_cl=pg_cl,
            )
        else:
            with open(args.output, "w") as sam_out:
                stats = run(
                    pairs, smap, ref, mapcfg, scheme, dpcfg, sam_out,
                    residual_prefix=args.residual_out, threads=args.threads,
                    batch_size=args.batch_size, cigar_mode=args.cigar, pg_cl=pg_cl,
                )
        print(
            f"mapped {stats.pairs_total} pairs: "
            f"{stats.mapped_light} light, {stats.mapped_dp} dp, "
            f"{stats.seedmap_miss} seedmap-miss, {stats.adjacency_fail} adjacency-fail",
            file=sys.stderr,
        )

    _with_cleanup(outputs, go)
    return 0


def _cmd_simulate(args) -> int:
    ref = parse_fasta(args.reference)
    cfg = SimConfig(
        read_len=args.read_len,
        insert_mean=args.insert_mean,
        insert_sd=args.insert_sd,
        error_rate=args.error_rate,
        seed=args.seed,
        pair_count=args.pairs,
    )
    suffix = ".fastq.gz" if args.gzip else ".fastq"
    fq1_path = args.output + "_1" + suffix
    fq2_path = args.output + "_2" + suffix
    truth_path = args.output + "_truth.tsv"

    def opener(path):
        if args.gzip:
            import io

            return io.TextIOWrapper(gzip.GzipFile(path, "wb", mtime=0), encoding="ascii")
        return open(path, "w")

    def go():
        with opener(fq1_path) as f1, opener(fq2_path) as f2, open(truth_path, "w") as tr:
            n = write_simulated(ref, cfg, f1, f2, tr)
        print(f"simulated {n} pairs", file=sys.stderr)

    _with_cleanup([fq1_path, fq2_path, truth_path], go)
    return 0


def _cmd_stats(args) -> int:
    smap = load(args.index)
    ref = _load_reference_checked(args.reference, smap)
    mapcfg = MapConfig(delta=args.delta, max_pair_candidates=args.max_candidates)
    scheme = ScoringScheme()
    dpcfg = DpConfig(scheme=scheme)
    pairs = parse_fastq_pair(args.fastq1, args.fastq2)
    report = observation_report(pairs, smap, ref, scheme, dpcfg, mapcfg)

    outputs = [] if args.output == "-" else [args.output]
    if args.cdf_csv:
        outputs.append(args.cdf_csv)

    def go():
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.output == "-":
            print(text)
        else:
            with open(args.output, "w") as fh:
                fh.write(text + "\n")
        if args.cdf_csv:
            with open(args.cdf_csv, "w") as fh:
                write_cdf_csv(report, fh)

    _with_cleanup(outputs, go)
    return 0


def _with_cleanup(paths: list[str], action: Callable[[], None]) -> None:
    """Run an output-writing action, removing partial outputs on failure."""
    try:
        action()
    except BaseException:
        for path in paths:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    commands = {
        ("index", "build"): _cmd_index_build,
        ("index", "inspect"): _cmd_index_inspect,
        ("map", None): _cmd_map,
        ("simulate", None): _cmd_simulate,
        ("stats", None): _cmd_stats,
    }
    key = (args.command, getattr(args, "index_command", None))
    handler = commands[key]
    try:
        return handler(args)
    except (GenPairError, OSError, ValueError) as exc:
        print(f"genpair: error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
