import io
import math

import numpy as np
import pytest

from helpers import make_reference, random_dna
from genpair.seq import encode, reverse_complement
from genpair.simulate import (
    Edit,
    ReferenceTooShort,
    SimConfig,
    format_edits,
    parse_edits,
    replay_edits,
    simulate,
    write_simulated,
)

RNG = np.random.default_rng(99)
GENOME = random_dna(RNG, 100000)
REF = make_reference({"chrS": GENOME})


def run_sim(**kw):
    cfg = SimConfig(**kw)
    return list(simulate(REF, cfg))


class TestConfigValidation:
    def test_insert_mean_below_read_len(self):
        with pytest.raises(ValueError):
            SimConfig(read_len=150, insert_mean=100)

    def test_error_rate_range(self):
        with pytest.raises(ValueError):
            SimConfig(error_rate=1.0)

    def test_error_mix_sums_to_one(self):
        with pytest.raises(ValueError):
            SimConfig(error_mix=(0.5, 0.5, 0.5))


class TestErrorFree:
    def test_reads_are_reference_substrings(self):
        for pair, truth in run_sim(pair_count=200, seed=1):
            assert pair.read1.decode() == GENOME[truth.pos1 : truth.pos1 + 150]
            fwd2 = reverse_complement(pair.read2).decode()
            assert fwd2 == GENOME[truth.pos2 : truth.pos2 + 150]
            assert truth.edits1 == [] and truth.edits2 == []

    def test_fr_orientation_and_insert(self):
        for pair, truth in run_sim(pair_count=100, seed=2):
            assert truth.strand1 == "+" and truth.strand2 == "-"
            assert truth.insert >= 150
            assert truth.pos2 + 150 - truth.pos1 == truth.insert

    def test_determinism(self):
        a = run_sim(pair_count=50, seed=42, error_rate=0.01)
        b = run_sim(pair_count=50, seed=42, error_rate=0.01)
        for (pa, ta), (pb, tb) in zip(a, b):
            assert pa.read1 == pb.read1 and pa.read2 == pb.read2
            assert ta.tsv_row() == tb.tsv_row()

    def test_different_seeds_differ(self):
        a = run_sim(pair_count=20, seed=1)
        b = run_sim(pair_count=20, seed=2)
        assert any(pa.read1 != pb.read1 for (pa, _), (pb, _) in zip(a, b))


class TestTruthReplay:
    def test_edits_reproduce_reads_exactly(self):
        for pair, truth in run_sim(pair_count=300, seed=3, error_rate=0.02):
            tmpl1 = REF.sequences[0][1]
            codes, nflags = replay_edits(
                tmpl1.codes[truth.pos1 :], tmpl1.n_flags[truth.pos1 :], truth.edits1, 150
            )
            assert np.array_equal(codes, pair.read1.codes)
            frag_end = truth.pos2 + 150
            w_lo = max(0, frag_end - 150 - 64)
            tmpl2 = reverse_complement(tmpl1[w_lo:frag_end])
            codes2, _ = replay_edits(tmpl2.codes, tmpl2.n_flags, truth.edits2, 150)
            assert np.array_equal(codes2, pair.read2.codes)

    def test_edit_string_roundtrip(self):
        edits = [Edit(3, "S", "G"), Edit(10, "I", "A"), Edit(29, "D")]
        assert parse_edits(format_edits(edits)) == edits
        assert parse_edits(".") == []
        assert format_edits([]) == "."


class TestInsertDistribution:
    def test_mean_within_three_sigma(self):
        n = 100_000
        cfg = SimConfig(pair_count=n, seed=4, insert_mean=350, insert_sd=50)
        inserts = np.array([t.insert for _, t in simulate(REF, cfg)], dtype=np.float64)
        assert inserts.min() >= 150
        sigma_mean = 50 / math.sqrt(n)
        # truncation at read_len biases upward negligibly at these settings
        assert abs(inserts.mean() - 350) < 3 * sigma_mean + 0.05

    def test_insert_at_least_read_len(self):
        cfg = SimConfig(pair_count=2000, seed=5, insert_mean=160, insert_sd=40)
        for _, truth in simulate(REF, cfg):
            assert truth.insert >= 150


class TestErrorRate:
    def test_observed_rate_within_three_sigma(self):
        rate = 0.01
        pairs = run_sim(pair_count=10_000, seed=6, error_rate=rate)
        events = 0
        trials = 0
        for _, truth in pairs:
            for edits in (truth.edits1, truth.edits2):
                dels = sum(1 for e in edits if e.op == "D")
                events += len(edits)
                trials += 150 + dels
        observed = events / trials
        sigma = math.sqrt(rate * (1 - rate) / trials)
        assert abs(observed - rate) < 3 * sigma

    def test_error_mix_shares(self):
        pairs = run_sim(pair_count=5000, seed=7, error_rate=0.01)
        from collections import Counter

        ops = Counter()
        for _, truth in pairs:
            for e in truth.edits1 + truth.edits2:
                ops[e.op] += 1
        total = sum(ops.values())
        for op in "SID":
            assert abs(ops[op] / total - 1 / 3) < 0.05

    def test_substitution_always_changes_base(self):
        for pair, truth in run_sim(pair_count=500, seed=8, error_rate=0.02):
            text1 = pair.read1.decode()
            for e in truth.edits1:
                if e.op == "S":
                    # the read base at the substitution differs from template
                    t_base = GENOME[truth.pos1 + e.t_off]
                    assert e.base != t_base


class TestBoundaries:
    def test_reference_too_short(self):
        tiny = make_reference({"t": random_dna(np.random.default_rng(0), 300)})
        with pytest.raises(ReferenceTooShort):
            list(simulate(tiny, SimConfig(pair_count=1, seed=0, insert_mean=350)))

    def test_multi_sequence_placement(self):
        multi = make_reference(
            {
                "a": random_dna(np.random.default_rng(1), 5000),
                "b": random_dna(np.random.default_rng(2), 5000),
            }
        )
        seen = {t.chrom1 for _, t in simulate(multi, SimConfig(pair_count=400, seed=9))}
        assert seen == {"a", "b"}


class TestWriter:
    def test_fastq_and_truth_streams(self):
        f1, f2, tr = io.StringIO(), io.StringIO(), io.StringIO()
        n = write_simulated(REF, SimConfig(pair_count=3, seed=10), f1, f2, tr)
        assert n == 3
        lines1 = f1.getvalue().strip().split("\n")
        assert len(lines1) == 12
        assert lines1[0] == "@sim0000000/1"
        truth_lines = tr.getvalue().strip().split("\n")
        assert truth_lines[0].startswith("#pair_id")
        assert len(truth_lines) == 4
        assert truth_lines[1].split("\t")[0] == "sim0000000"
