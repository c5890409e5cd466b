"""Affine-gap dynamic-programming aligner with traceback.

Serves as the fallback for reads the light aligner rejects and as the
independent scoring oracle in tests. Gap cost convention: a gap of length k
costs gap_open + k * gap_extend (the opening does not include the first
extension). Row sweeps are vectorized with numpy; the horizontal gap
recurrence is computed as a running-maximum scan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GenPairError
from .lightalign import Alignment, Method, ScoringScheme
from .seq import PackedSequence

_NEG = -(1 << 28)


class BandExceeded(GenPairError):
    pass


@dataclass(frozen=True)
class DpConfig:
    scheme: ScoringScheme = field(default_factory=ScoringScheme)
    band_width: int = 16  # 0 disables banding
    pad: int = 8  # extra reference bases on each side of a candidate window

    def __post_init__(self):
        if self.band_width < 0:
            raise ValueError("band_width must be >= 0")
        if self.pad < 0:
            raise ValueError("pad must be >= 0")


def _fill(read: PackedSequence, window: PackedSequence, scheme: ScoringScheme, free_ends: bool, band_width: int):
    """Fill M/D/I score matrices plus traceback choices.

    Returns (best, argbest, dext, iext, band_center, escape_bound). argbest
    prefers the diagonal state over D over I on ties; dext/iext mark
    gap-extension predecessors (preferred over opening on ties).

    escape_bound is the maximum score held by any band-boundary cell; a
    boundary cell outscoring the in-band optimum means a clipped path was
    still winning when it hit the band wall, so callers raise BandExceeded
    (conservative detection, not a certificate). In the free-ends mode a
    start outside the band counts as a different anchor, not an escape.
    """
    L, W = len(read), len(window)
    rc = read.codes.astype(np.int64)
    rn = read.n_flags
    wc = window.codes.astype(np.int64)
    wn = window.n_flags
    m, x = scheme.match, scheme.mismatch
    o, e = scheme.gap_open, scheme.gap_extend

    band_center = (W - L) // 2 if free_ends else 0
    banded = band_width > 0
    if banded and abs((W - L) - band_center) > band_width:
        raise BandExceeded("alignment endpoint lies outside the band")

    M = np.full((L + 1, W + 1), _NEG, dtype=np.int32)
    D = np.full((L + 1, W + 1), _NEG, dtype=np.int32)
    I = np.full((L + 1, W + 1), _NEG, dtype=np.int32)
    best = np.full((L + 1, W + 1), _NEG, dtype=np.int32)
    argbest = np.zeros((L + 1, W + 1), dtype=np.uint8)
    dext = np.zeros((L + 1, W + 1), dtype=bool)
    iext = np.zeros((L + 1, W + 1), dtype=bool)

    cols = np.arange(W + 1, dtype=np.int32)
    if free_ends:
        best[0, :] = 0
        M[0, :] = 0
    else:
        M[0, 0] = 0
        best[0, 0] = 0
        if W:
            D[0, 1:] = o + e * cols[1:]
            dext[0, 1:] = True
            best[0, 1:] = D[0, 1:]
            argbest[0, 1:] = 1

    ecol = e * cols

    def band_limits(i: int) -> tuple[int, int]:
        lo = max(0, i + band_center - band_width)
        hi = min(W, i + band_center + band_width)
        return lo, hi

    if banded:
        lo0, hi0 = band_limits(0)
        if lo0 > 0:
            best[0, :lo0] = _NEG
            M[0, :lo0] = _NEG
            D[0, :lo0] = _NEG
        if hi0 < W:
            best[0, hi0 + 1 :] = _NEG
            M[0, hi0 + 1 :] = _NEG
            D[0, hi0 + 1 :] = _NEG

    for i in range(1, L + 1):
        base = rc[i - 1]
        if rn[i - 1]:
            sub = np.full(W, x, dtype=np.int32)
        else:
            sub = np.where((wc == base) & ~wn, m, x).astype(np.int32)

        M[i, 1:] = best[i - 1, :-1] + sub
        if not free_ends:
            M[i, 0] = _NEG

        open_v = best[i - 1] + (o + e)
        ext_v = I[i - 1] + e
        np.maximum(ext_v, open_v, out=I[i])
        iext[i] = ext_v >= open_v
        if not free_ends and i >= 1:
            # column 0: only insertion chain is possible
            I[i, 0] = o + e * i
            iext[i, 0] = i > 1
            argbest[i, 0] = 2

        # Horizontal gaps open from a diagonal or vertical state and extend
        # along the row: a running-max scan gives every D cell at once.
        MI = np.maximum(M[i], I[i])
        if banded:
            lo, hi = band_limits(i)
            if lo > 0:
                MI[:lo] = _NEG
            if hi < W:
                MI[hi + 1 :] = _NEG
        run = np.maximum.accumulate(MI[:-1] - ecol[:-1])
        D[i, 1:] = (o + ecol[1:]) + run
        dext[i, 1:] = D[i, 1:] == D[i, :-1] + e

        np.maximum(M[i], D[i], out=best[i])
        np.maximum(best[i], I[i], out=best[i])
        argbest[i] = np.where(
            M[i] == best[i], 0, np.where(D[i] == best[i], 1, 2)
        ).astype(np.uint8)
        if not free_ends:
            argbest[i, 0] = 2

        if banded:
            lo, hi = band_limits(i)
            if lo > 0:
                best[i, :lo] = _NEG
                M[i, :lo] = _NEG
                D[i, :lo] = _NEG
                I[i, :lo] = _NEG
            if hi < W:
                best[i, hi + 1 :] = _NEG
                M[i, hi + 1 :] = _NEG
                D[i, hi + 1 :] = _NEG
                I[i, hi + 1 :] = _NEG

    escape_bound = _NEG
    if banded:
        # row 0 counts for global mode only: there a boundary cell is a real
        # leading-gap prefix, while free-ends paths start inside the band
        first_row = 1 if free_ends else 0
        for i in range(first_row, L + 1):
            lo, hi = band_limits(i)
            for edge in {lo, hi}:
                if abs((edge - i) - band_center) != band_width:
                    continue
                val = int(best[i, edge])
                if val > escape_bound:
                    escape_bound = val

    return best, argbest, dext, iext, band_center, escape_bound


def _traceback(
    read: PackedSequence,
    window: PackedSequence,
    argbest: np.ndarray,
    dext: np.ndarray,
    iext: np.ndarray,
    i: int,
    j: int,
    stop_at_row0: bool,
    band_width: int,
    band_center: int,
) -> tuple[list[tuple[int, str]], int]:
    """Walk traceback pointers from (i, j); returns (cigar, start column)."""
    rc = read.codes
    rn = read.n_flags
    wc = window.codes
    wn = window.n_flags
    ops: list[str] = []
    state = int(argbest[i, j])
    banded = band_width > 0

    def check_band(ii: int, jj: int):
        if banded and abs((jj - ii) - band_center) == band_width:
            raise BandExceeded("optimal path touches the band boundary")

    check_band(i, j)
    while (i > 0) if stop_at_row0 else (i > 0 or j > 0):
        if state == 0:
            equal = (rc[i - 1] == wc[j - 1]) and not rn[i - 1] and not wn[j - 1]
            ops.append("=" if equal else "X")
            i -= 1
            j -= 1
            state = int(argbest[i, j])
        elif state == 1:
            ops.append("D")
            extend = bool(dext[i, j])
            j -= 1
            state = 1 if extend else int(argbest[i, j])
        else:
            ops.append("I")
            extend = bool(iext[i, j])
            i -= 1
            state = 2 if extend else int(argbest[i, j])
        check_band(i, j)

    ops.reverse()
    cigar: list[tuple[int, str]] = []
    for op in ops:
        if cigar and cigar[-1][1] == op:
            cigar[-1] = (cigar[-1][0] + 1, op)
        else:
            cigar.append((1, op))
    return cigar, j


def align_global(
    read: PackedSequence,
    ref_window: PackedSequence,
    cfg: DpConfig,
    ref_start: int = 0,
) -> Alignment:
    """Maximum-score end-to-end alignment of read against the whole window."""
    L, W = len(read), len(ref_window)
    if L == 0 or W == 0:
        raise ValueError("align_global requires non-empty sequences")
    best, argbest, dext, iext, center, escape_bound = _fill(
        read, ref_window, cfg.scheme, free_ends=False, band_width=cfg.band_width
    )
    score = int(best[L, W])
    if escape_bound > score:
        raise BandExceeded("a path through the band boundary could beat the in-band optimum")
    cigar, _ = _traceback(
        read, ref_window, argbest, dext, iext, L, W,
        stop_at_row0=False, band_width=cfg.band_width, band_center=center,
    )
    return Alignment(score, cigar, ref_start, Method.DP)


def align_glocal(
    read: PackedSequence,
    ref_window: PackedSequence,
    cfg: DpConfig,
    ref_start: int = 0,
) -> Alignment:
    """Align the read end-to-end; leading/trailing window bases are free.

    The returned ref_start is adjusted to the first consumed window base.
    """
    L, W = len(read), len(ref_window)
    if L == 0:
        raise ValueError("align_glocal requires a non-empty read")
    if W < L:
        raise ValueError("window shorter than read")
    best, argbest, dext, iext, center, escape_bound = _fill(
        read, ref_window, cfg.scheme, free_ends=True, band_width=cfg.band_width
    )
    j_end = int(np.argmax(best[L]))
    score = int(best[L, j_end])
    if escape_bound > score:
        raise BandExceeded("a path through the band boundary could beat the in-band optimum")
    cigar, j_start = _traceback(
        read, ref_window, argbest, dext, iext, L, j_end,
        stop_at_row0=True, band_width=cfg.band_width, band_center=center,
    )
    return Alignment(score, cigar, ref_start + j_start, Method.DP)
