import io

import numpy as np
import pytest

from helpers import flip_base, make_reference, random_dna
from genpair.dpalign import DpConfig
from genpair.index import build
from genpair.lightalign import Method, ScoringScheme
from genpair.mapping import MapConfig
from genpair.pipeline import (
    FallbackReason,
    Outcome,
    RunStats,
    map_pair,
    mapq,
    run,
    sam_header,
    sam_records,
)
from genpair.seq import ReadPair, encode, parse_fastq_pair, reverse_complement
from genpair.seeding import SeedConfig, Strand
from genpair.simulate import SimConfig, simulate

RNG = np.random.default_rng(808)
GENOME = random_dna(RNG, 60000)
REF = make_reference({"chr1": GENOME})
SCFG = SeedConfig(seed_len=20, hash_bits=20)
SMAP = build(REF, SCFG, filter_threshold=100)
SCHEME = ScoringScheme()
DPCFG = DpConfig(scheme=SCHEME)
MAPCFG = MapConfig()
L = 150


def planted_pair(pos, insert=350, pair_id="p", mutate1=None, mutate2=None):
    frag = GENOME[pos : pos + insert]
    r1 = frag[:L]
    r2_template = frag[-L:]
    if mutate1:
        r1 = mutate1(r1)
    r2 = reverse_complement(encode(r2_template)).decode()
    if mutate2:
        r2 = mutate2(r2)
    return ReadPair(pair_id, encode(r1), encode(r2), "I" * len(r1), "I" * len(r2))


def _mm(pos):
    def f(text):
        return text[:pos] + flip_base(text[pos]) + text[pos + 1 :]

    return f


class TestMapPair:
    def test_error_free_pair(self):
        pair = planted_pair(9000, insert=400)
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.MAPPED_LIGHT
        assert pm.a1.score == 300 and pm.a2.score == 300
        assert pm.a1.ref_start == 9000
        assert pm.a2.ref_start == 9000 + 400 - L
        assert pm.tlen == 400
        assert (pm.strand1, pm.strand2) == (Strand.FWD, Strand.REV)
        assert pm.a1.method is Method.EXACT
        assert pm.mapq == 60

    def test_one_mismatch_mate1(self):
        pair = planted_pair(12000, mutate1=_mm(30))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.MAPPED_LIGHT
        assert (pm.a1.score, pm.a2.score) == (290, 300)
        assert pm.a1.method is Method.LIGHT

    def test_mixed_edits_mate2_goes_dp(self):
        # build mate 2 in forward orientation: one interior deletion plus one
        # interior mismatch against the reference, then reverse-complement
        pos1, pos2 = 15000, 15200
        w = GENOME[pos2 : pos2 + L + 1]
        fwd = (w[:70] + w[71:])[:L]
        fwd = fwd[:20] + flip_base(fwd[20]) + fwd[21:]
        pair = ReadPair(
            "mx", encode(GENOME[pos1 : pos1 + L]), reverse_complement(encode(fwd))
        )
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.MAPPED_DP
        assert pm.a1.method is Method.DP and pm.a2.method is Method.DP
        assert pm.a1.score == 300
        assert pm.a2.score == 276
        assert pm.a2.ref_start == pos2

    def test_insert_size_violation_adjacency_fail(self):
        frag1 = GENOME[20000 : 20000 + L]
        far = 20000 + 10 * MAPCFG.delta
        frag2 = GENOME[far : far + L]
        pair = ReadPair("x", encode(frag1), reverse_complement(encode(frag2)))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.FALLBACK_FULL
        assert pm.fallback_reason is FallbackReason.ADJACENCY_FAIL

    def test_unmatchable_reads_seedmap_miss(self):
        rng = np.random.default_rng(4321)
        pair = ReadPair("junk", encode(random_dna(rng, L)), encode(random_dna(rng, L)))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.FALLBACK_FULL
        assert pm.fallback_reason is FallbackReason.SEEDMAP_MISS

    def test_all_n_reads_fall_back(self):
        pair = ReadPair("n", encode("N" * L), encode("N" * L))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.FALLBACK_FULL
        assert pm.fallback_reason is FallbackReason.SEEDMAP_MISS

    def test_same_strand_placement_rejected(self):
        # both mates copied forward: candidates share a strand, FR fails
        pair = ReadPair(
            "ff",
            encode(GENOME[30000 : 30000 + L]),
            encode(GENOME[30200 : 30200 + L]),
        )
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert pm.outcome is Outcome.FALLBACK_FULL
        assert pm.fallback_reason is FallbackReason.ADJACENCY_FAIL


class TestMapq:
    def test_unique(self):
        assert mapq(600, None) == 60

    def test_tie(self):
        assert mapq(600, 600) == 0

    def test_gap_five(self):
        assert mapq(600, 595) == 15

    def test_gap_at_threshold(self):
        assert mapq(600, 580) == 60

    def test_gap_below_threshold(self):
        assert mapq(600, 581) == 57


class TestRunStats:
    def test_fractions_partition(self):
        s = RunStats(pairs_total=10, seedmap_miss=1, adjacency_fail=2, mapped_light=5, mapped_dp=2, lightalign_fail=2)
        total = (
            s.seedmap_miss_fraction
            + s.adjacency_fail_fraction
            + s.mapped_light_fraction
            + s.mapped_dp_fraction
        )
        assert total == pytest.approx(1.0)

    def test_empty(self):
        s = RunStats()
        assert s.mapped_light_fraction == 0.0


def _run_pairs(pairs, threads=1, residual_prefix=None, cigar_mode="eq"):
    out = io.StringIO()
    stats = run(
        pairs,
        SMAP,
        REF,
        MAPCFG,
        SCHEME,
        DPCFG,
        out,
        residual_prefix=residual_prefix,
        threads=threads,
        batch_size=16,
        cigar_mode=cigar_mode,
        pg_cl="test",
    )
    return out.getvalue(), stats


class TestRun:
    def test_empty_dataset(self):
        text, stats = _run_pairs([])
        lines = text.strip().split("\n")
        assert lines[0].startswith("@HD\tVN:1.6\tSO:unknown")
        assert any(l.startswith("@SQ\tSN:chr1\tLN:60000") for l in lines)
        assert any(l.startswith("@PG") for l in lines)
        assert stats.pairs_total == 0

    def test_simulated_error_free_all_light(self):
        pairs = [p for p, _ in simulate(REF, SimConfig(pair_count=120, seed=5))]
        text, stats = _run_pairs(pairs)
        assert stats.pairs_total == 120
        assert stats.mapped_light_fraction == 1.0
        body = [l for l in text.strip().split("\n") if not l.startswith("@")]
        assert len(body) == 240

    def test_record_order_matches_input(self):
        pairs = [p for p, _ in simulate(REF, SimConfig(pair_count=50, seed=6))]
        text, _ = _run_pairs(pairs)
        body = [l.split("\t")[0] for l in text.strip().split("\n") if not l.startswith("@")]
        assert body == [p.id for p in pairs for _ in (0, 1)]

    def test_threads_identical_output(self):
        pairs = [p for p, _ in simulate(REF, SimConfig(pair_count=64, seed=7, error_rate=0.005))]
        text1, stats1 = _run_pairs(pairs, threads=1)
        text2, stats2 = _run_pairs(pairs, threads=2)
        assert text1 == text2
        assert stats1.to_dict() == stats2.to_dict()

    def test_residual_export_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        good = [p for p, _ in simulate(REF, SimConfig(pair_count=3, seed=8))]
        junk = ReadPair("junk1", encode(random_dna(rng, L)), encode(random_dna(rng, L)), "I" * L, "I" * L)
        prefix = str(tmp_path / "res")
        text, stats = _run_pairs(good + [junk], residual_prefix=prefix)
        assert stats.seedmap_miss == 1
        back = list(parse_fastq_pair(prefix + "_1.fastq.gz", prefix + "_2.fastq.gz"))
        assert len(back) == 1
        assert back[0].id == "junk1"
        assert back[0].read1 == junk.read1
        assert back[0].read2 == junk.read2


class TestSamRecords:
    def _mapping(self, pair_id="p1", pos=40000, insert=380):
        pair = planted_pair(pos, insert=insert, pair_id=pair_id)
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        return pair, pm

    def test_flags_and_positions(self):
        pair, pm = self._mapping()
        rec1, rec2 = [r.split("\t") for r in sam_records(pair, pm, SMAP)]
        # R1 forward, mate reverse, first-in-pair, paired+proper
        assert int(rec1[1]) == 0x1 | 0x2 | 0x20 | 0x40
        assert int(rec2[1]) == 0x1 | 0x2 | 0x10 | 0x80
        assert rec1[2] == "chr1" and rec2[2] == "chr1"
        assert int(rec1[3]) == 40000 + 1
        assert int(rec2[3]) == 40000 + 380 - L + 1
        assert rec1[6] == "=" and rec2[6] == "="
        assert int(rec1[7]) == int(rec2[3])
        assert int(rec1[8]) == 380 and int(rec2[8]) == -380

    def test_seq_and_qual_orientation(self):
        pair, pm = self._mapping()
        rec1, rec2 = [r.split("\t") for r in sam_records(pair, pm, SMAP)]
        assert rec1[9] == pair.read1.decode()
        assert rec2[9] == reverse_complement(pair.read2).decode()
        assert rec2[10] == (pair.qual2 or "")[::-1]

    def test_tags(self):
        pair, pm = self._mapping()
        rec1, _ = [r.split("\t") for r in sam_records(pair, pm, SMAP)]
        assert "AS:i:300" in rec1
        assert "XG:A:E" in rec1

    def test_cigar_modes(self):
        pair = planted_pair(42000, pair_id="cm", mutate1=_mm(25))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        rec_eq = sam_records(pair, pm, SMAP, cigar_mode="eq")[0].split("\t")
        rec_m = sam_records(pair, pm, SMAP, cigar_mode="m")[0].split("\t")
        assert rec_eq[5] == "25=1X124="
        assert rec_m[5] == "150M"

    def test_fallback_pairs_produce_no_records(self):
        rng = np.random.default_rng(10)
        pair = ReadPair("junk", encode(random_dna(rng, L)), encode(random_dna(rng, L)))
        pm = map_pair(pair, SMAP, REF, MAPCFG, SCHEME, DPCFG)
        assert sam_records(pair, pm, SMAP) == []

    def test_multi_sequence_local_positions(self):
        two = make_reference({"a": GENOME[:31000], "b": GENOME[31000:]})
        smap2 = build(two, SCFG, filter_threshold=100)
        pos = 35000  # inside 'b'
        pair = planted_pair(pos, pair_id="mb")
        pm = map_pair(pair, smap2, two, MAPCFG, SCHEME, DPCFG)
        rec1, _ = [r.split("\t") for r in sam_records(pair, pm, smap2)]
        assert rec1[2] == "b"
        assert int(rec1[3]) == pos - 31000 + 1

    def test_header_shape(self):
        hdr = sam_header(SMAP, "map -x x").strip().split("\n")
        assert hdr[0] == "@HD\tVN:1.6\tSO:unknown"
        assert hdr[1] == "@SQ\tSN:chr1\tLN:60000"
        assert hdr[2].startswith("@PG\tID:genpair\tPN:genpair\tVN:")
        assert hdr[2].endswith("CL:map -x x")
