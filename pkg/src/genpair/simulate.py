"""Synthetic paired-end read generator with exact planted truth.

Fragments are drawn uniformly over the reference (normal insert length), read
1 is the forward prefix of the fragment and read 2 the reverse complement of
its suffix (FR orientation). Per-base errors are injected while walking the
template, and every edit is recorded so a truth record can reproduce the read
exactly. The generator is driven by numpy's PCG64 so a seed pins the entire
output stream across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterator, Optional

import numpy as np

from .errors import GenPairError
from .seq import PackedSequence, ReadPair, Reference, reverse_complement

_BASES = "ACGT"
_MARGIN = 64  # keeps error walks away from sequence ends


class ReferenceTooShort(GenPairError):
    pass


@dataclass(frozen=True)
class SimConfig:
    read_len: int = 150
    insert_mean: float = 350.0
    insert_sd: float = 50.0
    error_rate: float = 0.0
    error_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)  # sub, ins, del
    seed: int = 0
    pair_count: int = 1000

    def __post_init__(self):
        if self.read_len < 1:
            raise ValueError("read_len must be >= 1")
        if self.insert_mean < self.read_len:
            raise ValueError("insert_mean must be >= read_len")
        if not 0.0 <= self.error_rate < 1.0:
            raise ValueError("error_rate must be in [0, 1)")
        if abs(sum(self.error_mix) - 1.0) > 1e-9 or any(w < 0 for w in self.error_mix):
            raise ValueError("error_mix weights must be non-negative and sum to 1")
        if self.pair_count < 0:
            raise ValueError("pair_count must be >= 0")


@dataclass(frozen=True)
class Edit:
    """One planted edit at a template offset (in read orientation)."""

    t_off: int
    op: str  # 'S' substitution, 'I' insertion, 'D' deletion
    base: Optional[str] = None

    def text(self) -> str:
        return f"{self.t_off}{self.op}{self.base or ''}"


def format_edits(edits: list[Edit]) -> str:
    return ",".join(e.text() for e in edits) if edits else "."


def parse_edits(text: str) -> list[Edit]:
    if text == ".":
        return []
    out = []
    for item in text.split(","):
        i = 0
        while item[i].isdigit():
            i += 1
        out.append(Edit(int(item[:i]), item[i], item[i + 1 :] or None))
    return out


@dataclass
class PlantedTruth:
    pair_id: str
    chrom1: str
    pos1: int  # 0-based leftmost forward-strand coordinate of the read-1 template
    strand1: str
    chrom2: str
    pos2: int  # 0-based leftmost forward-strand coordinate of the nominal read-2 span
    strand2: str
    edits1: list[Edit] = field(default_factory=list)
    edits2: list[Edit] = field(default_factory=list)
    insert: int = 0

    def tsv_row(self) -> str:
        return "\t".join(
            (
                self.pair_id,
                self.chrom1,
                str(self.pos1),
                self.strand1,
                self.chrom2,
                str(self.pos2),
                self.strand2,
                format_edits(self.edits1) + "|" + format_edits(self.edits2),
            )
        )


TRUTH_HEADER = "#pair_id\tchrom1\tpos1\tstrand1\tchrom2\tpos2\tstrand2\tedits"


def replay_edits(
    template_codes: np.ndarray,
    template_nflags: np.ndarray,
    edits: list[Edit],
    read_len: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply recorded edits to a template walk, reproducing the read exactly."""
    out = np.empty(read_len, dtype=np.uint8)
    outn = np.zeros(read_len, dtype=bool)
    t = 0
    o = 0
    for ed in edits:
        while t < ed.t_off:
            out[o] = template_codes[t]
            outn[o] = template_nflags[t]
            o += 1
            t += 1
        if ed.op == "S":
            out[o] = _BASES.index(ed.base)
            o += 1
            t += 1
        elif ed.op == "I":
            out[o] = _BASES.index(ed.base)
            o += 1
        else:  # deletion
            t += 1
    while o < read_len:
        out[o] = template_codes[t]
        outn[o] = template_nflags[t]
        o += 1
        t += 1
    return out, outn


def _mutate_walk(
    template_codes: np.ndarray,
    template_nflags: np.ndarray,
    read_len: int,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, list[Edit]]:
    p = cfg.error_rate
    if p == 0.0:
        return template_codes[:read_len].copy(), template_nflags[:read_len].copy(), []

    # One Bernoulli draw per walk step, pre-drawn as a block; the walk takes
    # read_len steps plus one per deletion, so the slack bounds deletion runs.
    u = rng.random(read_len + _MARGIN)
    out = np.empty(read_len, dtype=np.uint8)
    outn = np.zeros(read_len, dtype=bool)
    edits: list[Edit] = []
    t = 0
    o = 0
    step = 0
    while o < read_len:
        if t >= len(template_codes) or step >= len(u):
            raise ReferenceTooShort("error walk ran past the template window")
        err = u[step] < p
        step += 1
        if err:
            kind = int(rng.choice(3, p=cfg.error_mix))
            if kind == 0:  # substitution: always a different base
                new = (int(template_codes[t]) + 1 + int(rng.integers(0, 3))) % 4
                out[o] = new
                edits.append(Edit(t, "S", _BASES[new]))
                o += 1
                t += 1
            elif kind == 1:  # insertion
                new = int(rng.integers(0, 4))
                out[o] = new
                edits.append(Edit(t, "I", _BASES[new]))
                o += 1
            else:  # deletion
                edits.append(Edit(t, "D"))
                t += 1
        else:
            out[o] = template_codes[t]
            outn[o] = template_nflags[t]
            o += 1
            t += 1
    return out, outn, edits


def simulate(ref: Reference, cfg: SimConfig) -> Iterator[tuple[ReadPair, PlantedTruth]]:
    """Yield (pair, truth) records, fully deterministic for a given seed."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    qual = "I" * cfg.read_len
    min_frag = cfg.read_len

    seq_codes = [s.codes for _, s in ref.sequences]
    seq_nflags = [s.n_flags for _, s in ref.sequences]
    seq_lens = np.array([len(s) for _, s in ref.sequences], dtype=np.int64)

    for i in range(cfg.pair_count):
        frag_len = max(min_frag, int(round(rng.normal(cfg.insert_mean, cfg.insert_sd))))
        room = seq_lens - frag_len - 2 * _MARGIN + 1
        room = np.maximum(room, 0)
        total_room = int(room.sum())
        if total_room <= 0:
            raise ReferenceTooShort(
                f"no sequence can place a fragment of {frag_len} bases"
            )
        pick = int(rng.integers(0, total_room))
        seq_idx = int(np.searchsorted(np.cumsum(room), pick, side="right"))
        offset_in_seq = pick - int(np.sum(room[:seq_idx]))
        frag_start = _MARGIN + offset_in_seq
        frag_end = frag_start + frag_len

        codes = seq_codes[seq_idx]
        nflags = seq_nflags[seq_idx]
        name = ref.sequences[seq_idx][0]

        window1 = slice(frag_start, min(len(codes), frag_end + _MARGIN))
        r1_codes, r1_n, edits1 = _mutate_walk(
            codes[window1], nflags[window1], cfg.read_len, cfg, rng
        )

        w2_lo = max(0, frag_end - cfg.read_len - _MARGIN)
        tmpl2 = reverse_complement(
            PackedSequence(codes[w2_lo:frag_end], nflags[w2_lo:frag_end])
        )
        r2_codes, r2_n, edits2 = _mutate_walk(
            tmpl2.codes, tmpl2.n_flags, cfg.read_len, cfg, rng
        )

        pair_id = f"sim{i:07d}"
        pair = ReadPair(
            id=pair_id,
            read1=PackedSequence(r1_codes, r1_n),
            read2=PackedSequence(r2_codes, r2_n),
            qual1=qual,
            qual2=qual,
        )
        truth = PlantedTruth(
            pair_id=pair_id,
            chrom1=name,
            pos1=frag_start,
            strand1="+",
            chrom2=name,
            pos2=frag_end - cfg.read_len,
            strand2="-",
            edits1=edits1,
            edits2=edits2,
            insert=frag_len,
        )
        yield pair, truth


def write_simulated(
    ref: Reference,
    cfg: SimConfig,
    fastq1: IO,
    fastq2: IO,
    truth: IO,
) -> int:
    """Stream a simulation to paired FASTQ plus the truth TSV sidecar."""
    truth.write(TRUTH_HEADER + "\n")
    n = 0
    for pair, t in simulate(ref, cfg):
        fastq1.write(f"@{pair.id}/1\n{pair.read1.decode()}\n+\n{pair.qual1}\n")
        fastq2.write(f"@{pair.id}/2\n{pair.read2.decode()}\n+\n{pair.qual2}\n")
        truth.write(t.tsv_row() + "\n")
        n += 1
    return n
