"""Offline seed index over the reference and its binary serialization.

The index is two tables in a prefix-offset (CSR) layout: a Seed Table of
2^hash_bits + 1 offsets, and a Location Table holding the sorted global
reference positions of every indexed seed window, grouped by hash bucket.
Reference windows are extracted at stride 1; windows containing an N are never
indexed, and buckets that collect more locations than the filter threshold are
emptied entirely.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GenPairError
from .hashing import xxhash32_rows
from .seq import Reference, pack_2bit_rows
from .seeding import SeedConfig

MAGIC = b"GPRX"
FORMAT_VERSION = 1

DEFAULT_FILTER_THRESHOLD = 500


class EmptyReference(GenPairError):
    pass


class BadMagic(GenPairError):
    pass


class VersionMismatch(GenPairError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"index format version {got}, expected {expected}")


class Truncated(GenPairError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"index file truncated: expected {expected} bytes, got {got}")


class ChecksumMismatch(GenPairError):
    pass


@dataclass
class RefMeta:
    """Sequence names and lengths carried by the index for coordinate output."""

    names: list[str]
    lengths: list[int]
    _starts: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_reference(cls, ref: Reference) -> "RefMeta":
        return cls(names=list(ref.names), lengths=list(ref.lengths))

    @property
    def cumulative_starts(self) -> np.ndarray:
        if self._starts is None:
            starts = np.zeros(len(self.lengths), dtype=np.int64)
            if len(self.lengths) > 1:
                np.cumsum(self.lengths[:-1], out=starts[1:])
            self._starts = starts
        return self._starts

    @property
    def total_length(self) -> int:
        return int(sum(self.lengths))

    def global_to_local(self, g: int) -> tuple[int, int]:
        if g < 0 or g >= self.total_length:
            raise IndexError(f"global coordinate {g} out of range")
        idx = int(np.searchsorted(self.cumulative_starts, g, side="right")) - 1
        return idx, g - int(self.cumulative_starts[idx])

    def matches_reference(self, ref: Reference) -> bool:
        return self.names == list(ref.names) and self.lengths == list(ref.lengths)


class SeedMap:
    """Immutable seed index: Seed Table offsets over a sorted Location Table."""

    def __init__(
        self,
        cfg: SeedConfig,
        seed_table: np.ndarray,
        location_table: np.ndarray,
        ref_meta: RefMeta,
        filter_threshold: int,
        filtered_bucket_count: Optional[int] = None,
        prefilter_stats: Optional[dict] = None,
    ):
        self.cfg = cfg
        self.seed_table = seed_table
        self.location_table = location_table
        self.ref_meta = ref_meta
        self.filter_threshold = filter_threshold
        # Known only at build time; not serialized.
        self.filtered_bucket_count = filtered_bucket_count
        self.prefilter_stats = prefilter_stats
        seed_table.setflags(write=False)
        location_table.setflags(write=False)

    @property
    def bucket_count(self) -> int:
        return 1 << self.cfg.hash_bits

    def query(self, h: int) -> np.ndarray:
        """Sorted global positions for a hash bucket, as a zero-copy slice."""
        lo = int(self.seed_table[h])
        hi = int(self.seed_table[h + 1])
        return self.location_table[lo:hi]


def _windows_for_sequence(
    codes: np.ndarray, nflags: np.ndarray, seed_len: int, cfg: SeedConfig, chunk_windows: int
):
    """Yield (hashes, local_positions) for every N-free window of one sequence."""
    n_win = len(codes) - seed_len + 1
    if n_win <= 0:
        return
    ncum = np.zeros(len(codes) + 1, dtype=np.int64)
    np.cumsum(nflags, out=ncum[1:])
    clean = (ncum[seed_len:] - ncum[:-seed_len]) == 0  # window start p -> no N inside
    windows = sliding_window_view(codes, seed_len)
    for lo in range(0, n_win, chunk_windows):
        hi = min(lo + chunk_windows, n_win)
        starts = np.nonzero(clean[lo:hi])[0]
        if starts.size == 0:
            continue
        starts = starts + lo
        packed = pack_2bit_rows(windows[starts])
        hashes = xxhash32_rows(packed, cfg.hash_seed)
        if cfg.hash_bits < 32:
            hashes = hashes & np.uint32(cfg.hash_mask)
        yield hashes, starts


def build(
    ref: Reference,
    cfg: Optional[SeedConfig] = None,
    filter_threshold: int = DEFAULT_FILTER_THRESHOLD,
    chunk_windows: int = 2_000_000,
) -> SeedMap:
    """Build the seed index over a reference at stride 1.

    Windows containing an N or crossing a sequence boundary are skipped;
    buckets whose pre-filter location count exceeds ``filter_threshold`` are
    removed entirely.
    """
    if cfg is None:
        cfg = SeedConfig()
    if filter_threshold < 1:
        raise ValueError("filter_threshold must be >= 1")
    if len(ref) == 0 or ref.total_length == 0:
        raise EmptyReference("reference has no sequence data")

    hash_chunks: list[np.ndarray] = []
    pos_chunks: list[np.ndarray] = []
    for seq_index, (_, seq) in enumerate(ref.sequences):
        g0 = int(ref.cumulative_starts[seq_index])
        for hashes, starts in _windows_for_sequence(
            seq.codes, seq.n_flags, cfg.seed_len, cfg, chunk_windows
        ):
            hash_chunks.append(hashes)
            pos_chunks.append((starts + g0).astype(np.uint64))

    n_buckets = 1 << cfg.hash_bits
    if hash_chunks:
        all_h = np.concatenate(hash_chunks)
        all_pos = np.concatenate(pos_chunks)
    else:
        all_h = np.zeros(0, dtype=np.uint32)
        all_pos = np.zeros(0, dtype=np.uint64)
    del hash_chunks, pos_chunks

    # Positions are generated in increasing global order, so a stable sort by
    # hash leaves every bucket's positions strictly increasing.
    order = np.argsort(all_h, kind="stable")
    all_h = all_h[order]
    all_pos = all_pos[order]
    del order

    counts = np.bincount(all_h.astype(np.int64), minlength=n_buckets)
    over = counts > filter_threshold
    filtered_bucket_count = int(over.sum())
    prefilter_nonempty = int((counts > 0).sum())
    prefilter_total = int(all_pos.size)

    if filtered_bucket_count:
        keep = ~over[all_h.astype(np.int64)]
        all_pos = all_pos[keep]
        counts[over] = 0

    seed_table = np.zeros(n_buckets + 1, dtype=np.uint64)
    np.cumsum(counts, out=seed_table[1:])

    prefilter_stats = {
        "buckets_nonempty": prefilter_nonempty,
        "total_locations": prefilter_total,
        "mean_locations_per_nonempty_bucket": (
            prefilter_total / prefilter_nonempty if prefilter_nonempty else 0.0
        ),
    }
    return SeedMap(
        cfg=cfg,
        seed_table=seed_table,
        location_table=all_pos,
        ref_meta=RefMeta.from_reference(ref),
        filter_threshold=filter_threshold,
        filtered_bucket_count=filtered_bucket_count,
        prefilter_stats=prefilter_stats,
    )


class _CrcWriter:
    def __init__(self, fh: BinaryIO):
        self.fh = fh
        self.crc = 0

    def write(self, data) -> None:
        data = memoryview(data)
        self.crc = zlib.crc32(data, self.crc)
        self.fh.write(data)


_ARRAY_WRITE_CHUNK = 1 << 24  # entries per write for large tables


def save(smap: SeedMap, path: str) -> None:
    """Serialize the index (little-endian, CRC32 trailer)."""
    with open(path, "wb") as fh:
        out = _CrcWriter(fh)
        out.write(MAGIC)
        out.write(
            struct.pack(
                "<IIIII",
                FORMAT_VERSION,
                smap.cfg.seed_len,
                smap.cfg.hash_bits,
                smap.cfg.hash_seed,
                smap.filter_threshold,
            )
        )
        meta = smap.ref_meta
        out.write(struct.pack("<Q", len(meta.names)))
        for name, length in zip(meta.names, meta.lengths):
            raw = name.encode("utf-8")
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
            out.write(struct.pack("<Q", length))
        seed_table = np.ascontiguousarray(smap.seed_table, dtype="<u8")
        for lo in range(0, len(seed_table), _ARRAY_WRITE_CHUNK):
            out.write(seed_table[lo : lo + _ARRAY_WRITE_CHUNK].tobytes())
        out.write(struct.pack("<Q", len(smap.location_table)))
        loc = np.ascontiguousarray(smap.location_table, dtype="<u8")
        for lo in range(0, len(loc), _ARRAY_WRITE_CHUNK):
            out.write(loc[lo : lo + _ARRAY_WRITE_CHUNK].tobytes())
        fh.write(struct.pack("<I", out.crc))


def load(path: str) -> SeedMap:
    """Load an index written by save(), verifying structure and checksum."""
    with open(path, "rb") as fh:
        data = fh.read()
    view = memoryview(data)
    if len(data) < 4 or view[:4] != MAGIC:
        if len(data) >= 4:
            raise BadMagic(f"bad index magic {bytes(view[:4])!r}")
        raise Truncated(expected=4, got=len(data))

    off = 4

    def need(n: int) -> int:
        nonlocal off
        if off + n > len(data):
            raise Truncated(expected=off + n, got=len(data))
        start = off
        off += n
        return start

    (version,) = struct.unpack_from("<I", data, need(4))
    if version != FORMAT_VERSION:
        raise VersionMismatch(expected=FORMAT_VERSION, got=version)
    seed_len, hash_bits, hash_seed, filter_threshold = struct.unpack_from("<IIII", data, need(16))
    try:
        cfg = SeedConfig(seed_len=seed_len, hash_bits=hash_bits, hash_seed=hash_seed)
    except ValueError as exc:
        raise GenPairError(f"index header invalid: {exc}") from exc

    (n_seq,) = struct.unpack_from("<Q", data, need(8))
    names: list[str] = []
    lengths: list[int] = []
    for _ in range(n_seq):
        (name_len,) = struct.unpack_from("<H", data, need(2))
        raw = bytes(view[need(name_len) : off])
        names.append(raw.decode("utf-8"))
        (length,) = struct.unpack_from("<Q", data, need(8))
        lengths.append(length)

    n_entries = (1 << hash_bits) + 1
    seed_table = np.frombuffer(data, dtype="<u8", count=n_entries, offset=need(8 * n_entries))
    (n_loc,) = struct.unpack_from("<Q", data, need(8))
    location_table = np.frombuffer(data, dtype="<u8", count=n_loc, offset=need(8 * n_loc))
    (stored_crc,) = struct.unpack_from("<I", data, need(4))
    if off != len(data):
        raise GenPairError(f"index file has {len(data) - off} trailing bytes")
    if zlib.crc32(view[: len(data) - 4]) != stored_crc:
        raise ChecksumMismatch("index file checksum mismatch")

    return SeedMap(
        cfg=cfg,
        seed_table=seed_table,
        location_table=location_table,
        ref_meta=RefMeta(names=names, lengths=lengths),
        filter_threshold=filter_threshold,
    )


def index_stats(smap: SeedMap) -> dict:
    """Bucket occupancy statistics (post-filter, with build-time pre-filter
    figures when the map was built in-process)."""
    counts = np.diff(smap.seed_table).astype(np.int64)
    nonempty = counts[counts > 0]
    total = int(smap.location_table.size)
    hist_counts = np.bincount(nonempty) if nonempty.size else np.zeros(0, dtype=np.int64)
    histogram = {int(size): int(num) for size, num in enumerate(hist_counts) if num and size}
    return {
        "buckets_nonempty": int(nonempty.size),
        "total_locations": total,
        "mean_locations_per_nonempty_bucket": (total / nonempty.size) if nonempty.size else 0.0,
        "filtered_bucket_count": smap.filtered_bucket_count,
        "prefilter": smap.prefilter_stats,
        "histogram": histogram,
    }
