"""DP-free alignment of reads whose only edits are a single type.

A read is compared against shifted copies of its candidate reference window
with per-base equality masks. If the mask pattern reconstructs the read
exactly under one hypothesis (scattered mismatches, one insertion run, or one
deletion run within fixed limits), the alignment score and CIGAR follow
directly with no dynamic programming. Anything else is rejected so the caller
can fall back to the DP aligner.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import GenPairError
from .seq import PackedSequence

# Window padding on each side of the candidate position. Equals the longest
# detectable deletion run; a shift of +-k needs k pad bases in that direction.
PAD = 5

MAX_MISMATCHES = 2
MAX_INSERTION_RUN = 2
MAX_DELETION_RUN = 5


class WindowTooShort(GenPairError):
    pass


class Method(enum.Enum):
    EXACT = "E"
    LIGHT = "L"
    DP = "D"


class EditKind(enum.Enum):
    EXACT = "exact"
    MISMATCHES = "mismatches"
    INSERTION = "insertion"
    DELETION = "deletion"


@dataclass(frozen=True)
class ScoringScheme:
    """Affine-gap scores; a gap of length k costs gap_open + k * gap_extend."""

    match: int = 2
    mismatch: int = -8
    gap_open: int = -12
    gap_extend: int = -2

    def gap_score(self, k: int) -> int:
        return self.gap_open + k * self.gap_extend

    def perfect_score(self, read_len: int) -> int:
        return self.match * read_len


@dataclass(frozen=True)
class EditHypothesis:
    """A single-edit-type explanation: kind, mismatch count or run length, and
    the 0-based read offset of the first edited base (gap anchor for runs)."""

    kind: EditKind
    size: int
    position: int


@dataclass
class Alignment:
    score: int
    cigar: list[tuple[int, str]]
    ref_start: int
    method: Method

    def cigar_string(self) -> str:
        return "".join(f"{n}{op}" for n, op in self.cigar)

    def read_consumed(self) -> int:
        return sum(n for n, op in self.cigar if op in "=XI")

    def ref_consumed(self) -> int:
        return sum(n for n, op in self.cigar if op in "=XD")


# Hypotheses in strictly descending score order for the fixed scheme; within
# equal-score groups mismatches beat deletions beat insertions.
_HYPOTHESES: list[tuple[EditKind, int]] = [
    (EditKind.MISMATCHES, 1),
    (EditKind.DELETION, 1),
    (EditKind.DELETION, 2),
    (EditKind.INSERTION, 1),
    (EditKind.DELETION, 3),
    (EditKind.MISMATCHES, 2),
    (EditKind.DELETION, 4),
    (EditKind.INSERTION, 2),
    (EditKind.DELETION, 5),
]


def count_masks_needed(max_edits: int) -> int:
    """Number of shifted equality masks required to detect runs up to
    ``max_edits`` long: one per shift in [-e, +e]."""
    if max_edits < 0:
        raise ValueError("max_edits must be >= 0")
    return 2 * max_edits + 1


def hamming_mask(read: PackedSequence, ref_window: PackedSequence, shift: int) -> np.ndarray:
    """Per-position equality between read[i] and ref_window[i + shift].

    Positions comparing against an N (either side) or falling outside the
    window are 0.
    """
    if abs(shift) > PAD:
        raise ValueError(f"|shift| must be <= {PAD}")
    L = len(read)
    mask = np.zeros(L, dtype=bool)
    lo = max(0, -shift)
    hi = min(L, len(ref_window) - shift)
    if hi <= lo:
        return mask
    r = slice(lo, hi)
    w = slice(lo + shift, hi + shift)
    mask[r] = (
        (read.codes[r] == ref_window.codes[w])
        & ~read.n_flags[r]
        & ~ref_window.n_flags[w]
    )
    return mask


def _prefix_run(mask: np.ndarray) -> int:
    if mask.all():
        return len(mask)
    return int(np.argmin(mask))


def _suffix_run(mask: np.ndarray) -> int:
    if mask.all():
        return len(mask)
    return int(np.argmin(mask[::-1]))


def _mismatch_cigar(mask: np.ndarray) -> list[tuple[int, str]]:
    change = np.flatnonzero(np.diff(mask)) + 1
    bounds = np.concatenate([[0], change, [len(mask)]])
    return [
        (int(b - a), "=" if mask[a] else "X") for a, b in zip(bounds[:-1], bounds[1:])
    ]


def classify(
    read: PackedSequence,
    ref_window: PackedSequence,
    scheme: ScoringScheme,
    ref_start: int = 0,
) -> tuple[EditHypothesis, Alignment] | None:
    """Try single-edit-type hypotheses in descending score order.

    ``ref_window`` must cover the candidate position with PAD extra bases on
    each side (length == len(read) + 2*PAD); WindowTooShort is raised
    otherwise and the caller should use the DP aligner instead. Returns the
    first hypothesis whose reconstruction is exact, or None when no
    single-type hypothesis explains the read (mixed edits, >2 mismatches, an
    insertion run >2 or a deletion run >5).

    Every hypothesis is checked against all shifted masks, preferring the
    candidate position: the prefix run may come from one mask and the suffix
    run from another, their shift difference fixing the gap length, so a read
    sitting a few bases off its projected start (or a gap run flush against a
    read edge) still reconstructs. Accepted scores therefore equal the DP
    optimum: any alignment mixing edit types or exceeding the run limits
    scores below the lowest rung of the hypothesis ladder.
    """
    L = len(read)
    if len(ref_window) != L + 2 * PAD:
        raise WindowTooShort(
            f"ref_window length {len(ref_window)} != read length {L} + 2*{PAD}"
        )
    if L == 0:
        raise ValueError("empty read")

    rc = read.codes
    rn = read.n_flags
    wc = ref_window.codes
    wn = ref_window.n_flags

    def mask_at(shift: int) -> np.ndarray:
        w = slice(PAD + shift, PAD + shift + L)
        return (rc == wc[w]) & ~rn & ~wn[w]

    # Candidate shift first, then nearest shifts outward.
    shift_order = [0]
    for s in range(1, PAD + 1):
        shift_order += [-s, s]
    masks = {s: mask_at(s) for s in shift_order}
    deficits = {s: L - int(masks[s].sum()) for s in shift_order}
    mask0 = masks[0]

    for s in shift_order:
        if deficits[s] == 0:
            hyp = EditHypothesis(EditKind.EXACT, 0, 0)
            aln = Alignment(scheme.perfect_score(L), [(L, "=")], ref_start + s, Method.EXACT)
            return hyp, aln

    prefixes = {s: _prefix_run(masks[s]) for s in shift_order}
    suffixes = {s: _suffix_run(masks[s]) for s in shift_order}

    for kind, size in _HYPOTHESES:
        if kind is EditKind.MISMATCHES:
            shift = next((s for s in shift_order if deficits[s] == size), None)
            if shift is None:
                continue
            mask = masks[shift]
            cigar = _mismatch_cigar(mask)
            score = scheme.match * (L - size) + scheme.mismatch * size
            position = int(np.argmin(mask))
            aln = Alignment(score, cigar, ref_start + shift, Method.LIGHT)
            return EditHypothesis(kind, size, position), aln

        if kind is EditKind.DELETION:
            # prefix aligned at shift s, suffix at shift s + run length
            for s in shift_order:
                if s + size > PAD:
                    continue
                lo = max(1, L - suffixes[s + size])
                hi = min(prefixes[s], L - 1)
                if lo > hi:
                    continue
                p = hi
                cigar = [(p, "="), (size, "D"), (L - p, "=")]
                score = scheme.match * L + scheme.gap_score(size)
                aln = Alignment(score, cigar, ref_start + s, Method.LIGHT)
                return EditHypothesis(kind, size, p), aln

        if kind is EditKind.INSERTION:
            # prefix aligned at shift s, suffix at shift s - run length
            for s in shift_order:
                if s - size < -PAD:
                    continue
                lo = max(1, L - size - suffixes[s - size])
                hi = min(prefixes[s], L - size - 1)
                if lo > hi:
                    continue
                p = hi
                cigar = [(p, "="), (size, "I"), (L - p - size, "=")]
                score = scheme.match * (L - size) + scheme.gap_score(size)
                aln = Alignment(score, cigar, ref_start + s, Method.LIGHT)
                return EditHypothesis(kind, size, p), aln

    return None
