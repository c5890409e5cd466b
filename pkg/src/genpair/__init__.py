"""Paired-end short-read mapper built around an exact-seed hash index,
paired-adjacency candidate filtering, and a DP-free light aligner with an
affine-gap DP fallback."""

__version__ = "0.1.0"

from .errors import GenPairError
from .seq import (
    PackedSequence,
    ReadPair,
    Reference,
    encode,
    decode,
    parse_fasta,
    parse_fastq_pair,
    reverse_complement,
)
from .seeding import Mate, SeedConfig, SeedSlot, Slot, Strand, extract_read_seeds, hash_seed, seed_slots
from .index import SeedMap, build, index_stats, load, save
from .mapping import Candidate, MapConfig, PairCandidate, candidates_for_read, pair_filter, seed_match_rate
from .lightalign import Alignment, EditHypothesis, EditKind, Method, ScoringScheme, classify, count_masks_needed, hamming_mask
from .dpalign import DpConfig, align_global, align_glocal
from .pipeline import Outcome, PairMapping, RunStats, map_pair, mapq, run
from .simulate import SimConfig, simulate
from .stats import observation_report

__all__ = [
    "GenPairError",
    "PackedSequence",
    "ReadPair",
    "Reference",
    "encode",
    "decode",
    "parse_fasta",
    "parse_fastq_pair",
    "reverse_complement",
    "Mate",
    "SeedConfig",
    "SeedSlot",
    "Slot",
    "Strand",
    "extract_read_seeds",
    "hash_seed",
    "seed_slots",
    "SeedMap",
    "build",
    "index_stats",
    "load",
    "save",
    "Candidate",
    "MapConfig",
    "PairCandidate",
    "candidates_for_read",
    "pair_filter",
    "seed_match_rate",
    "Alignment",
    "EditHypothesis",
    "EditKind",
    "Method",
    "ScoringScheme",
    "classify",
    "count_masks_needed",
    "hamming_mask",
    "DpConfig",
    "align_global",
    "align_glocal",
    "Outcome",
    "PairMapping",
    "RunStats",
    "map_pair",
    "mapq",
    "run",
    "SimConfig",
    "simulate",
    "observation_report",
    "__version__",
]
