"""DNA sequence representation and FASTA/FASTQ ingestion.

Bases are coded A=0, C=1, G=2, T=3 so that the complement of a code is
``code ^ 3``. Ambiguous bases (N, or any IUPAC code folded to N by the FASTA
parser) are stored as code 0 with a flag bit in an N-mask; an N position never
matches anything during seeding or alignment.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass
from typing import IO, Iterator, Optional, Union

import numpy as np

from .errors import GenPairError

A, C, G, T = 0, 1, 2, 3
_BASE_CHARS = "ACGT"

# 256-entry code table: ACGT (either case) -> 0..3, N/n -> 0 (flagged), else 255
_ENCODE = np.full(256, 255, dtype=np.uint8)
for _i, _ch in enumerate(_BASE_CHARS):
    _ENCODE[ord(_ch)] = _i
    _ENCODE[ord(_ch.lower())] = _i
_ENCODE[ord("N")] = 0
_ENCODE[ord("n")] = 0

_IS_N = np.zeros(256, dtype=bool)
_IS_N[ord("N")] = True
_IS_N[ord("n")] = True

_DECODE = np.frombuffer(_BASE_CHARS.encode(), dtype=np.uint8)

# IUPAC ambiguity codes (and U) fold to N at FASTA parse time
_IUPAC_TO_N = bytes.maketrans(b"RYSWKMBDHVUryswkmbdhvu", b"N" * 22)


class InvalidBase(GenPairError):
    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"invalid base {char!r} at position {position}")


class MalformedFasta(GenPairError):
    def __init__(self, line_no: int, msg: str = "malformed FASTA"):
        self.line_no = line_no
        super().__init__(f"{msg} at line {line_no}")


class MalformedFastq(GenPairError):
    def __init__(self, line_no: int, msg: str = "malformed FASTQ"):
        self.line_no = line_no
        super().__init__(f"{msg} at line {line_no}")


class RecordCountMismatch(GenPairError):
    pass


def complement(code: int) -> int:
    """Complement of a 2-bit base code (A<->T, C<->G)."""
    return code ^ 3


def pack_2bit(codes: np.ndarray) -> np.ndarray:
    """Pack base codes 4-per-byte, first base in the low-order bits of byte 0.

    This byte convention is shared by the sequence payload and the seed hash
    input, so index and query always agree.
    """
    n = len(codes)
    padded = n + (-n) % 4
    buf = np.zeros(padded, dtype=np.uint8)
    buf[:n] = codes
    return buf[0::4] | (buf[1::4] << 2) | (buf[2::4] << 4) | (buf[3::4] << 6)


def pack_2bit_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise pack_2bit for an (n, width) matrix of base codes."""
    n, width = rows.shape
    padded = width + (-width) % 4
    if padded != width:
        buf = np.zeros((n, padded), dtype=np.uint8)
        buf[:, :width] = rows
    else:
        buf = rows.astype(np.uint8, copy=False)
    return buf[:, 0::4] | (buf[:, 1::4] << 2) | (buf[:, 2::4] << 4) | (buf[:, 3::4] << 6)


class PackedSequence:
    """Immutable 2-bit encoded DNA with an N-mask.

    ``codes`` (np.uint8, one code per base) and ``n_flags`` (np.bool_) are the
    working representation; ``payload`` exposes the canonical packed bytes
    (exactly ceil(length/4) of them, 4 bases per byte).
    """

    __slots__ = ("_codes", "_nflags", "_payload")

    def __init__(self, codes: np.ndarray, n_flags: np.ndarray):
        codes = np.ascontiguousarray(codes, dtype=np.uint8)
        n_flags = np.ascontiguousarray(n_flags, dtype=bool)
        if codes.shape != n_flags.shape:
            raise ValueError("codes and n_flags must have identical length")
        codes.setflags(write=False)
        n_flags.setflags(write=False)
        self._codes = codes
        self._nflags = n_flags
        self._payload: Optional[bytes] = None

    @property
    def length(self) -> int:
        return len(self._codes)

    def __len__(self) -> int:
        return len(self._codes)

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def n_flags(self) -> np.ndarray:
        return self._nflags

    @property
    def n_mask(self) -> np.ndarray:
        """Boolean mask of ambiguous (N) positions."""
        return self._nflags

    @property
    def payload(self) -> bytes:
        """Packed 2-bit codes, ceil(length/4) bytes (N positions pack as 0)."""
        if self._payload is None:
            self._payload = pack_2bit(self._codes).tobytes()
        return self._payload

    def has_n(self) -> bool:
        return bool(self._nflags.any())

    def window(self, start: int, length: int) -> "PackedSequence":
        if start < 0 or start + length > len(self):
            raise IndexError("window out of range")
        return PackedSequence(self._codes[start : start + length], self._nflags[start : start + length])

    def __getitem__(self, item) -> "PackedSequence":
        if isinstance(item, slice):
            return PackedSequence(self._codes[item], self._nflags[item])
        raise TypeError("PackedSequence supports slice indexing only")

    def decode(self) -> str:
        out = _DECODE[self._codes]
        if self._nflags.any():
            out = out.copy()
            out[self._nflags] = ord("N")
        return out.tobytes().decode("ascii")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PackedSequence):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self._codes, other._codes)
            and np.array_equal(self._nflags, other._nflags)
        )

    def __hash__(self) -> int:
        return hash((self.payload, self._nflags.tobytes()))

    def __repr__(self) -> str:
        shown = self.decode() if len(self) <= 32 else self.decode()[:29] + "..."
        return f"PackedSequence({shown!r}, length={len(self)})"


def encode(text: str) -> PackedSequence:
    """Encode an ACGTN string (either case) into a PackedSequence.

    Raises InvalidBase for any other character.
    """
    raw = np.frombuffer(text.encode("ascii", errors="replace"), dtype=np.uint8)
    codes = _ENCODE[raw]
    bad = np.nonzero(codes == 255)[0]
    if bad.size:
        pos = int(bad[0])
        raise InvalidBase(pos, text[pos])
    codes = codes.copy()
    nflags = _IS_N[raw]
    codes[nflags] = 0
    return PackedSequence(codes, nflags)


def decode(seq: PackedSequence) -> str:
    return seq.decode()


def reverse_complement(seq: PackedSequence) -> PackedSequence:
    """Reverse complement; the N-mask is mirrored along with the bases."""
    codes = (seq.codes[::-1] ^ 3).astype(np.uint8)
    nflags = seq.n_flags[::-1].copy()
    codes[nflags] = 0
    return PackedSequence(codes, nflags)


@dataclass
class ReadPair:
    """One paired-end read with optional per-base quality strings."""

    id: str
    read1: PackedSequence
    read2: PackedSequence
    qual1: Optional[str] = None
    qual2: Optional[str] = None


class Reference:
    """Ordered named sequences addressed by a concatenated global coordinate."""

    def __init__(self, sequences: list[tuple[str, PackedSequence]]):
        self.sequences = sequences
        starts = np.zeros(len(sequences), dtype=np.int64)
        total = 0
        for i, (_, s) in enumerate(sequences):
            starts[i] = total
            total += len(s)
        self.cumulative_starts = starts
        self.total_length = total
        self._cat_codes: Optional[np.ndarray] = None
        self._cat_nflags: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.sequences]

    @property
    def lengths(self) -> list[int]:
        return [len(s) for _, s in self.sequences]

    def global_to_local(self, g: int) -> tuple[int, int]:
        """Map a global coordinate to (sequence index, local offset)."""
        if g < 0 or g >= self.total_length:
            raise IndexError(f"global coordinate {g} out of range")
        idx = int(np.searchsorted(self.cumulative_starts, g, side="right")) - 1
        return idx, g - int(self.cumulative_starts[idx])

    def local_to_global(self, seq_index: int, offset: int) -> int:
        if not 0 <= seq_index < len(self.sequences):
            raise IndexError(f"sequence index {seq_index} out of range")
        if not 0 <= offset < len(self.sequences[seq_index][1]):
            raise IndexError(f"offset {offset} out of range for sequence {seq_index}")
        return int(self.cumulative_starts[seq_index]) + offset

    def sequence_bounds(self, seq_index: int) -> tuple[int, int]:
        """Global [start, end) span of one sequence."""
        start = int(self.cumulative_starts[seq_index])
        return start, start + len(self.sequences[seq_index][1])

    @property
    def codes(self) -> np.ndarray:
        """Concatenated base codes over all sequences (cached)."""
        if self._cat_codes is None:
            if self.sequences:
                self._cat_codes = np.concatenate([s.codes for _, s in self.sequences])
            else:
                self._cat_codes = np.zeros(0, dtype=np.uint8)
            self._cat_codes.setflags(write=False)
        return self._cat_codes

    @property
    def n_flags(self) -> np.ndarray:
        """Concatenated N flags over all sequences (cached)."""
        if self._cat_nflags is None:
            if self.sequences:
                self._cat_nflags = np.concatenate([s.n_flags for _, s in self.sequences])
            else:
                self._cat_nflags = np.zeros(0, dtype=bool)
            self._cat_nflags.setflags(write=False)
        return self._cat_nflags


GZIP_MAGIC = b"\x1f\x8b"


def _open_text(source: Union[str, IO]) -> IO:
    """Open a path or stream as text, transparently decompressing gzip.

    Gzip input is detected by its magic bytes, not by file extension.
    """
    if isinstance(source, (str, bytes)):
        fh = open(source, "rb")
    elif isinstance(source, io.TextIOBase):
        return source
    else:
        fh = source
    if not hasattr(fh, "peek"):
        fh = io.BufferedReader(fh)
    head = fh.peek(2)[:2]
    if head == GZIP_MAGIC:
        return io.TextIOWrapper(gzip.GzipFile(fileobj=fh), encoding="ascii")
    return io.TextIOWrapper(fh, encoding="ascii")


def parse_fasta(source: Union[str, IO]) -> Reference:
    """Parse (optionally gzipped) FASTA into a Reference.

    Sequence case is folded to upper; IUPAC ambiguity codes other than ACGT
    become N. Sequence data before the first header or an empty record is
    rejected as MalformedFasta.
    """
    fh = _open_text(source)
    records: list[tuple[str, PackedSequence]] = []
    name: Optional[str] = None
    chunks: list[bytes] = []
    header_line = 0

    def flush():
        if name is None:
            return
        data = b"".join(chunks)
        if not data:
            raise MalformedFasta(header_line, f"record {name!r} has no sequence data")
        raw = np.frombuffer(data, dtype=np.uint8)
        codes = _ENCODE[raw]
        bad = np.nonzero(codes == 255)[0]
        if bad.size:
            pos = int(bad[0])
            raise InvalidBase(pos, chr(int(raw[pos])))
        codes = codes.copy()
        nflags = _IS_N[raw]
        codes[nflags] = 0
        records.append((name, PackedSequence(codes, nflags)))

    for line_no, line in enumerate(fh, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        if line.startswith(">"):
            flush()
            name = line[1:].split(None, 1)[0] if line[1:].strip() else ""
            if not name:
                raise MalformedFasta(line_no, "empty record name")
            header_line = line_no
            chunks = []
        else:
            if name is None:
                raise MalformedFasta(line_no, "sequence data before first header")
            chunks.append(line.encode("ascii").translate(_IUPAC_TO_N))
    flush()
    return Reference(records)


_ID_SUFFIXES = ("/1", "/2")


def _strip_pair_suffix(header: str) -> str:
    name = header.split(None, 1)[0]
    if name.endswith(_ID_SUFFIXES):
        name = name[:-2]
    return name


def _fastq_records(fh: IO, label: str) -> Iterator[tuple[str, str, str]]:
    line_no = 0
    while True:
        header = fh.readline()
        if not header:
            return
        line_no += 1
        header = header.rstrip("\r\n")
        if not header.startswith("@"):
            raise MalformedFastq(line_no, f"{label}: record header must start with '@'")
        seq = fh.readline().rstrip("\r\n")
        plus = fh.readline()
        qual = fh.readline()
        if not qual:
            raise MalformedFastq(line_no, f"{label}: truncated record")
        line_no += 3
        if not plus.startswith("+"):
            raise MalformedFastq(line_no - 1, f"{label}: separator line must start with '+'")
        qual = qual.rstrip("\r\n")
        if len(qual) != len(seq):
            raise MalformedFastq(line_no, f"{label}: quality length differs from sequence length")
        yield header[1:], seq, qual


def parse_fastq_pair(source1: Union[str, IO], source2: Union[str, IO]) -> Iterator[ReadPair]:
    """Iterate positionally corresponding records of two 4-line FASTQ streams.

    The pair id comes from stream 1 with any trailing '/1' (or '/2') or
    whitespace-delimited tail stripped.
    """
    it1 = _fastq_records(_open_text(source1), "read1")
    it2 = _fastq_records(_open_text(source2), "read2")
    while True:
        rec1 = next(it1, None)
        rec2 = next(it2, None)
        if rec1 is None and rec2 is None:
            return
        if rec1 is None or rec2 is None:
            which = "stream 2" if rec2 is None else "stream 1"
            raise RecordCountMismatch(f"{which} ended before its mate stream")
        header1, seq1, qual1 = rec1
        _, seq2, qual2 = rec2
        yield ReadPair(
            id=_strip_pair_suffix(header1),
            read1=encode(seq1),
            read2=encode(seq2),
            qual1=qual1 or None,
            qual2=qual2 or None,
        )
