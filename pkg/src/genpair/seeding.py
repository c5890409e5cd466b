"""Partitioned seed extraction and hashing.

Each read contributes up to three fixed-length seeds (its first, middle, and
last ``seed_len`` bases). Seeds are hashed over their packed 2-bit bytes, and
both read orientations are seeded because the reference index is forward-only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import GenPairError
from .hashing import xxhash32
from .seq import PackedSequence, ReadPair, pack_2bit, reverse_complement


class ReadTooShort(GenPairError):
    pass


class ContainsN(GenPairError):
    pass


class Slot(enum.IntFlag):
    """Seed slot within a read; values double as slot_mask bits."""

    FIRST = 1
    MIDDLE = 2
    LAST = 4


class Strand(enum.Enum):
    FWD = "+"
    REV = "-"

    def __repr__(self) -> str:
        return f"Strand.{self.name}"


class Mate(enum.Enum):
    R1 = 1
    R2 = 2

    def __repr__(self) -> str:
        return f"Mate.{self.name}"


@dataclass(frozen=True)
class SeedConfig:
    seed_len: int = 50
    hash_bits: int = 28
    hash_seed: int = 0

    def __post_init__(self):
        if self.seed_len < 1:
            raise ValueError("seed_len must be >= 1")
        if not 16 <= self.hash_bits <= 32:
            raise ValueError("hash_bits must be in [16, 32]")
        if not 0 <= self.hash_seed < 2**32:
            raise ValueError("hash_seed must be a 32-bit value")

    @property
    def hash_mask(self) -> int:
        return (1 << self.hash_bits) - 1


@dataclass(frozen=True)
class SeedSlot:
    slot: Slot
    offset: int


@dataclass(frozen=True)
class ReadSeed:
    """One hashed seed extracted from a read pair."""

    hash: int
    slot: Slot
    strand: Strand
    mate: Mate


def seed_slots(read_len: int, cfg: SeedConfig) -> list[SeedSlot]:
    """Slot offsets for a read: first, middle, and last seed-length window.

    Slots may overlap on short reads; coinciding offsets deduplicate (a read
    exactly one seed long yields a single slot).
    """
    s = cfg.seed_len
    if read_len < s:
        raise ReadTooShort(f"read length {read_len} < seed length {s}")
    offsets = [0, (read_len - s) // 2, read_len - s]
    slots = []
    seen = set()
    for slot, off in zip((Slot.FIRST, Slot.MIDDLE, Slot.LAST), offsets):
        if off not in seen:
            seen.add(off)
            slots.append(SeedSlot(slot, off))
    return slots


def hash_window_codes(codes: np.ndarray, cfg: SeedConfig) -> int:
    """Hash a window given as raw base codes (no N check)."""
    return xxhash32(pack_2bit(codes).tobytes(), cfg.hash_seed) & cfg.hash_mask


def hash_seed(window: PackedSequence, cfg: SeedConfig) -> int:
    """Hash one seed window, truncated to the configured bit width.

    The hash input is the window's packed 2-bit bytes (4 bases per byte,
    first base in the low bits of byte 0), not ASCII.
    """
    if len(window) != cfg.seed_len:
        raise ValueError(f"window length {len(window)} != seed_len {cfg.seed_len}")
    if window.has_n():
        raise ContainsN("seed window contains an ambiguous base")
    return xxhash32(window.payload, cfg.hash_seed) & cfg.hash_mask


def extract_read_seeds(pair: ReadPair, cfg: SeedConfig) -> list[ReadSeed]:
    """All seed hashes of a pair: both mates, both orientations, all slots.

    Slots overlapping an N are silently omitted (exact match is impossible),
    and a mate shorter than the seed length contributes nothing.
    """
    out: list[ReadSeed] = []
    for mate, read in ((Mate.R1, pair.read1), (Mate.R2, pair.read2)):
        if len(read) < cfg.seed_len:
            continue
        slots = seed_slots(len(read), cfg)
        for strand, oriented in ((Strand.FWD, read), (Strand.REV, reverse_complement(read))):
            nflags = oriented.n_flags
            codes = oriented.codes
            for ss in slots:
                lo, hi = ss.offset, ss.offset + cfg.seed_len
                if nflags[lo:hi].any():
                    continue
                out.append(
                    ReadSeed(
                        hash=hash_window_codes(codes[lo:hi], cfg),
                        slot=ss.slot,
                        strand=strand,
                        mate=mate,
                    )
                )
    return out
