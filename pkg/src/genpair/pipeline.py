"""End-to-end per-pair orchestration, SAM output, and fallback accounting.

A pair flows through candidate generation, the paired-adjacency filter, light
alignment at each surviving candidate pair, and a glocal DP retry when no
candidate passes the light stage on both mates. Pairs with no candidates or no
adjacency-compatible candidate pair are exported to a residual FASTQ stream
for external tools rather than being re-mapped internally.
"""

from __future__ import annotations

import enum
import gzip
import itertools
import multiprocessing
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

from . import __version__
from .dpalign import BandExceeded, DpConfig, align_glocal
from .index import SeedMap
from .lightalign import PAD, Alignment, Method, ScoringScheme, WindowTooShort, classify
from .mapping import Candidate, MapConfig, PairCandidate, candidates_for_read, pair_filter
from .seq import PackedSequence, ReadPair, Reference, reverse_complement
from .seeding import Mate, Strand

DEFAULT_BATCH_SIZE = 4096


class Outcome(enum.Enum):
    MAPPED_LIGHT = "mapped_light"
    MAPPED_DP = "mapped_dp"
    FALLBACK_FULL = "fallback_full"


class FallbackReason(enum.Enum):
    SEEDMAP_MISS = "seedmap_miss"
    ADJACENCY_FAIL = "adjacency_fail"


@dataclass
class PairMapping:
    pair_id: str
    outcome: Outcome
    a1: Optional[Alignment]
    a2: Optional[Alignment]
    tlen: int
    mapq: int
    strand1: Optional[Strand] = None
    strand2: Optional[Strand] = None
    fallback_reason: Optional[FallbackReason] = None


@dataclass
class RunStats:
    pairs_total: int = 0
    seedmap_miss: int = 0
    adjacency_fail: int = 0
    lightalign_fail: int = 0
    mapped_light: int = 0
    mapped_dp: int = 0

    def _frac(self, n: int) -> float:
        return n / self.pairs_total if self.pairs_total else 0.0

    @property
    def seedmap_miss_fraction(self) -> float:
        return self._frac(self.seedmap_miss)

    @property
    def adjacency_fail_fraction(self) -> float:
        return self._frac(self.adjacency_fail)

    @property
    def lightalign_fail_fraction(self) -> float:
        return self._frac(self.lightalign_fail)

    @property
    def mapped_light_fraction(self) -> float:
        return self._frac(self.mapped_light)

    @property
    def mapped_dp_fraction(self) -> float:
        return self._frac(self.mapped_dp)

    def add(self, other: "RunStats") -> None:
        self.pairs_total += other.pairs_total
        self.seedmap_miss += other.seedmap_miss
        self.adjacency_fail += other.adjacency_fail
        self.lightalign_fail += other.lightalign_fail
        self.mapped_light += other.mapped_light
        self.mapped_dp += other.mapped_dp

    def to_dict(self) -> dict:
        return {
            "pairs_total": self.pairs_total,
            "seedmap_miss_fraction": self.seedmap_miss_fraction,
            "adjacency_fail_fraction": self.adjacency_fail_fraction,
            "lightalign_fail_fraction": self.lightalign_fail_fraction,
            "mapped_light_fraction": self.mapped_light_fraction,
            "mapped_dp_fraction": self.mapped_dp_fraction,
        }


def mapq(best: int, second_best: Optional[int]) -> int:
    """Mapping quality from the best and runner-up summed pair scores."""
    if second_best is None:
        return 60
    gap = best - second_best
    if gap == 0:
        return 0
    if gap >= 20:
        return 60
    return min(60, 3 * gap)


def _same_sequence(smap: SeedMap, pc: PairCandidate) -> bool:
    meta = smap.ref_meta
    return meta.global_to_local(pc.c1.start)[0] == meta.global_to_local(pc.c2.start)[0]


def _light_window(ref: Reference, smap: SeedMap, start: int, read_len: int) -> Optional[PackedSequence]:
    """Candidate window with exactly PAD context on each side, or None at a
    sequence edge where that context cannot be formed."""
    seq_idx, _ = smap.ref_meta.global_to_local(start)
    g0, g1 = ref.sequence_bounds(seq_idx)
    lo = start - PAD
    hi = start + read_len + PAD
    if lo < g0 or hi > g1:
        return None
    return PackedSequence(ref.codes[lo:hi], ref.n_flags[lo:hi])


def _dp_window(ref: Reference, smap: SeedMap, start: int, read_len: int, pad: int) -> tuple[PackedSequence, int]:
    seq_idx, _ = smap.ref_meta.global_to_local(start)
    g0, g1 = ref.sequence_bounds(seq_idx)
    lo = max(g0, start - pad)
    hi = min(g1, start + read_len + pad)
    return PackedSequence(ref.codes[lo:hi], ref.n_flags[lo:hi]), lo


def _oriented(read: PackedSequence, strand: Strand) -> PackedSequence:
    return read if strand is Strand.FWD else reverse_complement(read)


def _pair_tiebreak(pc: PairCandidate):
    return (pc.span, pc.min_start(), pc.c1.start, pc.c2.start)


def _finish(pair_id: str, outcome: Outcome, pc: PairCandidate, a1: Alignment, a2: Alignment, q: int) -> PairMapping:
    left = min(a1.ref_start, a2.ref_start)
    right = max(a1.ref_start + a1.ref_consumed(), a2.ref_start + a2.ref_consumed())
    span = right - left
    tlen = span if a1.ref_start <= a2.ref_start else -span
    return PairMapping(
        pair_id=pair_id,
        outcome=outcome,
        a1=a1,
        a2=a2,
        tlen=tlen,
        mapq=q,
        strand1=pc.c1.strand,
        strand2=pc.c2.strand,
    )


def map_pair(
    pair: ReadPair,
    smap: SeedMap,
    ref: Reference,
    mapcfg: MapConfig,
    scheme: ScoringScheme,
    dpcfg: DpConfig,
) -> PairMapping:
    """Map one pair; every failure mode is encoded in the outcome."""
    cands1 = candidates_for_read(pair.read1, Mate.R1, smap)
    cands2 = candidates_for_read(pair.read2, Mate.R2, smap) if cands1 else []
    if not cands1 or not cands2:
        return PairMapping(
            pair.id, Outcome.FALLBACK_FULL, None, None, 0, 0,
            fallback_reason=FallbackReason.SEEDMAP_MISS,
        )
    pcs = pair_filter(cands1, cands2, mapcfg, len(pair.read1), len(pair.read2))
    pcs = [pc for pc in pcs if _same_sequence(smap, pc)]
    if not pcs:
        return PairMapping(
            pair.id, Outcome.FALLBACK_FULL, None, None, 0, 0,
            fallback_reason=FallbackReason.ADJACENCY_FAIL,
        )

    oriented1 = {s: _oriented(pair.read1, s) for s in (Strand.FWD, Strand.REV)}
    oriented2 = {s: _oriented(pair.read2, s) for s in (Strand.FWD, Strand.REV)}

    # Light stage: a candidate pair survives only if both mates classify.
    light_hits: list[tuple[PairCandidate, Alignment, Alignment, int]] = []
    for pc in pcs:
        w1 = _light_window(ref, smap, pc.c1.start, len(pair.read1))
        w2 = _light_window(ref, smap, pc.c2.start, len(pair.read2))
        if w1 is None or w2 is None:
            continue
        r1 = classify(oriented1[pc.c1.strand], w1, scheme, ref_start=pc.c1.start)
        if r1 is None:
            continue
        r2 = classify(oriented2[pc.c2.strand], w2, scheme, ref_start=pc.c2.start)
        if r2 is None:
            continue
        light_hits.append((pc, r1[1], r2[1], r1[1].score + r2[1].score))

    if light_hits:
        light_hits.sort(key=lambda t: (-t[3],) + _pair_tiebreak(t[0]))
        pc, a1, a2, total = light_hits[0]
        second = light_hits[1][3] if len(light_hits) > 1 else None
        return _finish(pair.id, Outcome.MAPPED_LIGHT, pc, a1, a2, mapq(total, second))

    # DP stage: both mates realigned at every candidate pair; the mapping
    # locations are already known, so seeding and chaining are not repeated.
    dp_hits: list[tuple[PairCandidate, Alignment, Alignment, int]] = []
    for pc in pcs:
        a1 = _dp_align(oriented1[pc.c1.strand], ref, smap, pc.c1.start, dpcfg)
        a2 = _dp_align(oriented2[pc.c2.strand], ref, smap, pc.c2.start, dpcfg)
        dp_hits.append((pc, a1, a2, a1.score + a2.score))
    dp_hits.sort(key=lambda t: (-t[3],) + _pair_tiebreak(t[0]))
    pc, a1, a2, total = dp_hits[0]
    second = dp_hits[1][3] if len(dp_hits) > 1 else None
    return _finish(pair.id, Outcome.MAPPED_DP, pc, a1, a2, mapq(total, second))


def _dp_align(oriented: PackedSequence, ref: Reference, smap: SeedMap, start: int, dpcfg: DpConfig) -> Alignment:
    window, w0 = _dp_window(ref, smap, start, len(oriented), dpcfg.pad)
    try:
        return align_glocal(oriented, window, dpcfg, ref_start=w0)
    except BandExceeded:
        unbanded = DpConfig(scheme=dpcfg.scheme, band_width=0, pad=dpcfg.pad)
        return align_glocal(oriented, window, unbanded, ref_start=w0)


# ---------------------------------------------------------------------------
# SAM output

_FLAG_PAIRED = 0x1
_FLAG_PROPER = 0x2
_FLAG_REVERSE = 0x10
_FLAG_MATE_REVERSE = 0x20
_FLAG_FIRST = 0x40
_FLAG_SECOND = 0x80


def sam_header(smap: SeedMap, pg_cl: str) -> str:
    lines = ["@HD\tVN:1.6\tSO:unknown"]
    for name, length in zip(smap.ref_meta.names, smap.ref_meta.lengths):
        lines.append(f"@SQ\tSN:{name}\tLN:{length}")
    lines.append(f"@PG\tID:genpair\tPN:genpair\tVN:{__version__}\tCL:{pg_cl}")
    return "\n".join(lines) + "\n"


def _cigar_text(aln: Alignment, mode: str) -> str:
    if mode == "eq":
        return aln.cigar_string()
    merged: list[tuple[int, str]] = []
    for n, op in aln.cigar:
        op = "M" if op in "=X" else op
        if merged and merged[-1][1] == op:
            merged[-1] = (merged[-1][0] + n, op)
        else:
            merged.append((n, op))
    return "".join(f"{n}{op}" for n, op in merged)


def _sam_mate_line(
    pair: ReadPair,
    pm: PairMapping,
    smap: SeedMap,
    first: bool,
    cigar_mode: str,
) -> str:
    aln = pm.a1 if first else pm.a2
    other = pm.a2 if first else pm.a1
    strand = pm.strand1 if first else pm.strand2
    mate_strand = pm.strand2 if first else pm.strand1
    read = pair.read1 if first else pair.read2
    qual = pair.qual1 if first else pair.qual2

    flag = _FLAG_PAIRED | _FLAG_PROPER | (_FLAG_FIRST if first else _FLAG_SECOND)
    if strand is Strand.REV:
        flag |= _FLAG_REVERSE
    if mate_strand is Strand.REV:
        flag |= _FLAG_MATE_REVERSE

    meta = smap.ref_meta
    seq_idx, local = meta.global_to_local(aln.ref_start)
    _, mate_local = meta.global_to_local(other.ref_start)
    if strand is Strand.REV:
        seq_text = reverse_complement(read).decode()
        qual_text = qual[::-1] if qual else "*"
    else:
        seq_text = read.decode()
        qual_text = qual if qual else "*"
    tlen = pm.tlen if first else -pm.tlen
    return "\t".join(
        (
            pm.pair_id,
            str(flag),
            meta.names[seq_idx],
            str(local + 1),
            str(pm.mapq),
            _cigar_text(aln, cigar_mode),
            "=",
            str(mate_local + 1),
            str(tlen),
            seq_text,
            qual_text,
            f"AS:i:{aln.score}",
            f"XG:A:{aln.method.value}",
        )
    )


def sam_records(pair: ReadPair, pm: PairMapping, smap: SeedMap, cigar_mode: str = "eq") -> list[str]:
    if pm.outcome is Outcome.FALLBACK_FULL:
        return []
    return [
        _sam_mate_line(pair, pm, smap, True, cigar_mode),
        _sam_mate_line(pair, pm, smap, False, cigar_mode),
    ]


def _fastq_chunk(pair: ReadPair) -> tuple[str, str]:
    q1 = pair.qual1 or "I" * len(pair.read1)
    q2 = pair.qual2 or "I" * len(pair.read2)
    rec1 = f"@{pair.id}\n{pair.read1.decode()}\n+\n{q1}\n"
    rec2 = f"@{pair.id}\n{pair.read2.decode()}\n+\n{q2}\n"
    return rec1, rec2


# ---------------------------------------------------------------------------
# Parallel runner

_WORKER: dict = {}


def _init_worker(smap, ref, mapcfg, scheme, dpcfg, cigar_mode):
    _WORKER.update(
        smap=smap, ref=ref, mapcfg=mapcfg, scheme=scheme, dpcfg=dpcfg, cigar_mode=cigar_mode
    )


def _process_batch(pairs: list[ReadPair]):
    smap = _WORKER["smap"]
    ref = _WORKER["ref"]
    mapcfg = _WORKER["mapcfg"]
    scheme = _WORKER["scheme"]
    dpcfg = _WORKER["dpcfg"]
    cigar_mode = _WORKER["cigar_mode"]
    stats = RunStats()
    sam_lines: list[str] = []
    residuals: list[tuple[str, str]] = []
    for pair in pairs:
        pm = map_pair(pair, smap, ref, mapcfg, scheme, dpcfg)
        stats.pairs_total += 1
        if pm.outcome is Outcome.MAPPED_LIGHT:
            stats.mapped_light += 1
        elif pm.outcome is Outcome.MAPPED_DP:
            stats.mapped_dp += 1
            stats.lightalign_fail += 1
        elif pm.fallback_reason is FallbackReason.SEEDMAP_MISS:
            stats.seedmap_miss += 1
        else:
            stats.adjacency_fail += 1
        if pm.outcome is Outcome.FALLBACK_FULL:
            residuals.append(_fastq_chunk(pair))
        else:
            sam_lines.extend(sam_records(pair, pm, smap, cigar_mode))
    return sam_lines, residuals, stats


def _batched(iterable: Iterable, size: int) -> Iterator[list]:
    it = iter(iterable)
    while True:
        batch = list(itertools.islice(it, size))
        if not batch:
            return
        yield batch


def run(
    pairs: Iterable[ReadPair],
    smap: SeedMap,
    ref: Reference,
    mapcfg: MapConfig,
    scheme: ScoringScheme,
    dpcfg: DpConfig,
    sam_out: IO,
    residual_prefix: Optional[str] = None,
    threads: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
    cigar_mode: str = "eq",
    pg_cl: str = "genpair map",
) -> RunStats:
    """Map a stream of pairs; SAM and residual output follow input order
    deterministically for any worker count."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    sam_out.write(sam_header(smap, pg_cl))

    res1 = res2 = None
    if residual_prefix is not None:
        res1 = gzip.GzipFile(residual_prefix + "_1.fastq.gz", "wb", mtime=0)
        res2 = gzip.GzipFile(residual_prefix + "_2.fastq.gz", "wb", mtime=0)

    total = RunStats()

    def consume(result):
        sam_lines, residuals, stats = result
        total.add(stats)
        for line in sam_lines:
            sam_out.write(line + "\n")
        if res1 is not None:
            for rec1, rec2 in residuals:
                res1.write(rec1.encode("ascii"))
                res2.write(rec2.encode("ascii"))

    try:
        if threads == 1:
            _init_worker(smap, ref, mapcfg, scheme, dpcfg, cigar_mode)
            for batch in _batched(pairs, batch_size):
                consume(_process_batch(batch))
        else:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(
                threads,
                initializer=_init_worker,
                initargs=(smap, ref, mapcfg, scheme, dpcfg, cigar_mode),
            ) as pool:
                for result in pool.imap(_process_batch, _batched(pairs, batch_size)):
                    consume(result)
    finally:
        if res1 is not None:
            res1.close()
            res2.close()
    return total
