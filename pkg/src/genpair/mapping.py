"""Per-read candidate generation and the paired-adjacency filter.

Each exact seed hit is projected to the read-start position it implies on the
forward reference; hits from different slots voting for the same start
coalesce. The pair filter then keeps only FR-oriented candidate pairs whose
projected starts lie within the adjacency threshold of each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .index import SeedMap
from .seq import PackedSequence, ReadPair, reverse_complement
from .seeding import Mate, SeedConfig, Slot, Strand, hash_window_codes, seed_slots


@dataclass(frozen=True)
class MapConfig:
    delta: int = 500
    max_pair_candidates: int = 16

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.max_pair_candidates < 1:
            raise ValueError("max_pair_candidates must be >= 1")


@dataclass
class Candidate:
    """A projected read-start position on the forward reference."""

    start: int
    strand: Strand
    slot_mask: int
    mate: Mate

    def slot_votes(self) -> int:
        return bin(self.slot_mask).count("1")


@dataclass
class PairCandidate:
    c1: Candidate
    c2: Candidate
    span: int

    def min_start(self) -> int:
        return min(self.c1.start, self.c2.start)


def candidates_for_read(
    read: PackedSequence,
    mate: Mate,
    smap: SeedMap,
    cfg: Optional[MapConfig] = None,
) -> list[Candidate]:
    """Projected candidate starts for one read, both orientations.

    Hits whose implied read placement would run off the reference or cross a
    sequence boundary are discarded. Output is sorted by start and
    deduplicated per (start, strand) with merged slot votes.
    """
    del cfg  # candidate generation needs only the index configuration
    L = len(read)
    scfg: SeedConfig = smap.cfg
    if L < scfg.seed_len:
        return []
    meta = smap.ref_meta
    starts_arr = meta.cumulative_starts
    lengths = np.asarray(meta.lengths, dtype=np.int64)
    total = meta.total_length

    merged: dict[tuple[int, Strand], int] = {}
    slots = seed_slots(L, scfg)
    for strand, oriented in ((Strand.FWD, read), (Strand.REV, reverse_complement(read))):
        codes = oriented.codes
        nflags = oriented.n_flags
        for ss in slots:
            lo, hi = ss.offset, ss.offset + scfg.seed_len
            if nflags[lo:hi].any():
                continue
            h = hash_window_codes(codes[lo:hi], scfg)
            locs = smap.query(h)
            if locs.size == 0:
                continue
            proj = locs.astype(np.int64) - ss.offset
            ok = (proj >= 0) & (proj + L <= total)
            if not ok.all():
                proj = proj[ok]
            if proj.size == 0:
                continue
            seq_idx = np.searchsorted(starts_arr, proj, side="right") - 1
            inside = proj + L <= starts_arr[seq_idx] + lengths[seq_idx]
            for start in proj[inside]:
                key = (int(start), strand)
                merged[key] = merged.get(key, 0) | int(ss.slot)
    out = [
        Candidate(start=start, strand=strand, slot_mask=mask, mate=mate)
        for (start, strand), mask in merged.items()
    ]
    out.sort(key=lambda c: (c.start, c.strand is Strand.REV))
    return out


def _pair_sort_key(pc: PairCandidate):
    # c1's strand disambiguates pairs that coincide on every position
    return (pc.min_start(), pc.c1.start, pc.c2.start, pc.c1.strand is Strand.REV)


def _pair_preference_key(pc: PairCandidate):
    votes = pc.c1.slot_votes() + pc.c2.slot_votes()
    return (-votes, pc.span, pc.min_start(), pc.c1.start, pc.c2.start, pc.c1.strand is Strand.REV)


def pair_filter(
    cands1: list[Candidate],
    cands2: list[Candidate],
    cfg: MapConfig,
    read_len1: int,
    read_len2: int,
) -> list[PairCandidate]:
    """FR-oriented candidate pairs whose starts lie within delta of each other.

    Equivalent to the filtered cross product, computed with a two-pointer
    sweep over the sorted inputs. The output is truncated to
    ``max_pair_candidates`` preferring the largest combined slot vote (ties:
    smaller span, then smaller start) and is sorted by min start.
    """
    delta = cfg.delta
    pairs: list[PairCandidate] = []
    lo = 0
    n1 = len(cands1)
    for c2 in cands2:
        while lo < n1 and cands1[lo].start < c2.start - delta:
            lo += 1
        j = lo
        while j < n1 and cands1[j].start <= c2.start + delta:
            c1 = cands1[j]
            j += 1
            if c1.strand is c2.strand:
                continue
            span = max(c1.start + read_len1, c2.start + read_len2) - min(c1.start, c2.start)
            pairs.append(PairCandidate(c1=c1, c2=c2, span=span))
    if len(pairs) > cfg.max_pair_candidates:
        pairs.sort(key=_pair_preference_key)
        pairs = pairs[: cfg.max_pair_candidates]
    pairs.sort(key=_pair_sort_key)
    return pairs


def seed_match_rate(dataset: Iterable[ReadPair], smap: SeedMap, cfg: MapConfig) -> float:
    """Fraction of pairs where both mates hit an exact seed at a common locus
    (i.e. at least one adjacency-compatible candidate pair exists)."""
    total = 0
    hit = 0
    for pair in dataset:
        total += 1
        c1 = candidates_for_read(pair.read1, Mate.R1, smap)
        if not c1:
            continue
        c2 = candidates_for_read(pair.read2, Mate.R2, smap)
        if not c2:
            continue
        if pair_filter(c1, c2, cfg, len(pair.read1), len(pair.read2)):
            hit += 1
    return hit / total if total else 0.0
