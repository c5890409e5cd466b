"""Shared test utilities: genome builders, edit planting, and CIGAR replay."""

from __future__ import annotations

import numpy as np

from genpair.seq import PackedSequence, Reference, encode

BASES = "ACGT"


def random_dna(rng: np.random.Generator, length: int) -> str:
    return "".join(BASES[i] for i in rng.integers(0, 4, size=length))


def random_packed(rng: np.random.Generator, length: int) -> PackedSequence:
    codes = rng.integers(0, 4, size=length, dtype=np.uint8)
    return PackedSequence(codes, np.zeros(length, dtype=bool))


def random_reference(rng: np.random.Generator, length: int, name: str = "chr1") -> Reference:
    codes = rng.integers(0, 4, size=length, dtype=np.uint8)
    return Reference([(name, PackedSequence(codes, np.zeros(length, dtype=bool)))])


def flip_base(ch: str) -> str:
    return {"A": "C", "C": "G", "G": "T", "T": "A"}[ch]


def plant_single_edit(window_interior: str, kind: str, size: int, pos: int, extended: str) -> str:
    """Build a read from a window interior with one planted single-type edit.

    ``extended`` supplies bases beyond the interior's right end for deletion
    plants. Mismatch plants flip ``size`` bases starting at pos (scattered
    plants pass size 1 repeatedly instead).
    """
    L = len(window_interior)
    if kind == "exact":
        return window_interior
    if kind == "mismatch":
        chars = list(window_interior)
        for k in range(size):
            chars[pos + k] = flip_base(chars[pos + k])
        return "".join(chars)
    if kind == "insertion":
        ins = "".join(flip_base(window_interior[(pos + k) % L]) for k in range(size))
        return (window_interior[:pos] + ins + window_interior[pos:])[:L]
    if kind == "deletion":
        tail = window_interior + extended
        return (tail[:pos] + tail[pos + size :])[:L]
    raise ValueError(kind)


def replay_cigar(read: PackedSequence, window: PackedSequence, cigar, window_offset: int) -> bool:
    """Check a CIGAR replay: '=' positions must match, 'X' must differ, and
    consumed lengths must agree with the read."""
    i = 0
    j = window_offset
    rc = read.codes
    rn = read.n_flags
    wc = window.codes
    wn = window.n_flags
    for n, op in cigar:
        if op == "=":
            for k in range(n):
                if rn[i + k] or wn[j + k] or rc[i + k] != wc[j + k]:
                    return False
            i += n
            j += n
        elif op == "X":
            for k in range(n):
                same = (not rn[i + k]) and (not wn[j + k]) and rc[i + k] == wc[j + k]
                if same:
                    return False
            i += n
            j += n
        elif op == "I":
            i += n
        elif op == "D":
            j += n
        else:
            return False
    return i == len(read)


def make_reference(text_by_name: dict[str, str]) -> Reference:
    return Reference([(name, encode(text)) for name, text in text_by_name.items()])
