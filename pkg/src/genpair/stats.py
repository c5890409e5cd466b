"""Dataset-level measurements: exact-seed pair rate, locations per queried
seed, edit-class mix of mapped pairs, and the min-of-pair score CDF.

Edit classes are labeled from a fresh DP alignment at the mapped position, not
from the light aligner, so the light path never grades its own work.
"""

from __future__ import annotations

from collections import Counter
from typing import IO, Iterable, Optional

from .dpalign import DpConfig
from .index import SeedMap
from .lightalign import MAX_DELETION_RUN, MAX_INSERTION_RUN, MAX_MISMATCHES, Alignment, ScoringScheme
from .mapping import MapConfig
from .pipeline import Outcome, _dp_align, _oriented, map_pair
from .seq import ReadPair, Reference
from .seeding import extract_read_seeds


def classify_cigar(cigar: list[tuple[int, str]]) -> str:
    """Label a CIGAR by the edit structure it implies."""
    x_total = sum(n for n, op in cigar if op == "X")
    i_runs = [n for n, op in cigar if op == "I"]
    d_runs = [n for n, op in cigar if op == "D"]
    if x_total == 0 and not i_runs and not d_runs:
        return "exact"
    if x_total and not i_runs and not d_runs:
        return f"{x_total}_mismatches"
    if i_runs and not d_runs and x_total == 0 and len(i_runs) == 1:
        return f"{i_runs[0]}_insertion_run"
    if d_runs and not i_runs and x_total == 0 and len(d_runs) == 1:
        return f"{d_runs[0]}_deletion_run"
    return "mixed"


def is_single_type_within_limits(cigar: list[tuple[int, str]]) -> bool:
    """True when the edit structure stays within the light-alignable limits."""
    x_total = sum(n for n, op in cigar if op == "X")
    i_runs = [n for n, op in cigar if op == "I"]
    d_runs = [n for n, op in cigar if op == "D"]
    if not i_runs and not d_runs:
        return x_total <= MAX_MISMATCHES
    if x_total == 0 and not d_runs and len(i_runs) == 1:
        return i_runs[0] <= MAX_INSERTION_RUN
    if x_total == 0 and not i_runs and len(d_runs) == 1:
        return d_runs[0] <= MAX_DELETION_RUN
    return False


def observation_report(
    dataset: Iterable[ReadPair],
    smap: SeedMap,
    ref: Reference,
    scheme: ScoringScheme,
    dpcfg: DpConfig,
    mapcfg: Optional[MapConfig] = None,
) -> dict:
    if mapcfg is None:
        mapcfg = MapConfig()
    pairs_total = 0
    adjacent_pairs = 0
    seed_queries = 0
    seed_locations = 0
    mapped_pairs = 0
    single_type_pairs = 0
    class_counts: Counter[str] = Counter()
    min_scores: list[int] = []

    for pair in dataset:
        pairs_total += 1
        for seed in extract_read_seeds(pair, smap.cfg):
            seed_queries += 1
            seed_locations += int(smap.query(seed.hash).size)

        pm = map_pair(pair, smap, ref, mapcfg, scheme, dpcfg)
        if pm.outcome is Outcome.FALLBACK_FULL:
            continue
        adjacent_pairs += 1
        mapped_pairs += 1

        labels = []
        within = []
        for aln, read, strand in (
            (pm.a1, pair.read1, pm.strand1),
            (pm.a2, pair.read2, pm.strand2),
        ):
            dp = _relabel(aln, read, strand, ref, smap, dpcfg)
            labels.append(classify_cigar(dp.cigar))
            within.append(is_single_type_within_limits(dp.cigar))
        class_counts.update(labels)
        if all(within):
            single_type_pairs += 1
        min_scores.append(min(pm.a1.score, pm.a2.score))

    min_scores.sort()
    cdf: list[tuple[int, float]] = []
    if min_scores:
        n = len(min_scores)
        seen = 0
        last = None
        for s in min_scores:
            seen += 1
            if s != last:
                cdf.append((s, seen / n))
                last = s
            else:
                cdf[-1] = (s, seen / n)

    return {
        "pairs_total": pairs_total,
        "exact_seed_pair_fraction": adjacent_pairs / pairs_total if pairs_total else 0.0,
        "mean_locations_per_queried_seed": (
            seed_locations / seed_queries if seed_queries else 0.0
        ),
        "mapped_pairs": mapped_pairs,
        "edit_class_counts": dict(sorted(class_counts.items())),
        "single_type_fraction": (
            single_type_pairs / mapped_pairs if mapped_pairs else 0.0
        ),
        "min_score_cdf": cdf,
    }


def _relabel(aln: Alignment, read, strand, ref: Reference, smap: SeedMap, dpcfg: DpConfig) -> Alignment:
    oriented = _oriented(read, strand)
    return _dp_align(oriented, ref, smap, aln.ref_start, dpcfg)


def write_cdf_csv(report: dict, out: IO) -> None:
    out.write("min_pair_score,cumulative_fraction\n")
    for score, frac in report["min_score_cdf"]:
        out.write(f"{score},{frac:.6f}\n")
