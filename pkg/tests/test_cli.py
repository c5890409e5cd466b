import gzip
import json
import os

import numpy as np
import pytest

from helpers import random_dna
from genpair.cli import main

RNG = np.random.default_rng(777)
GENOME_TEXT = random_dna(RNG, 40000)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    ref = d / "ref.fa"
    with open(ref, "w") as fh:
        fh.write(">chr1 test\n")
        for i in range(0, len(GENOME_TEXT), 70):
            fh.write(GENOME_TEXT[i : i + 70] + "\n")
    return d


@pytest.fixture(scope="module")
def indexed(workdir):
    idx = workdir / "ref.gprx"
    rc = main(
        [
            "index",
            "build",
            "-r",
            str(workdir / "ref.fa"),
            "-o",
            str(idx),
            "--seed-len",
            "20",
            "--hash-bits",
            "20",
            "--filter-threshold",
            "500",
        ]
    )
    assert rc == 0
    return idx


@pytest.fixture(scope="module")
def simulated(workdir):
    prefix = workdir / "sim"
    rc = main(
        [
            "simulate",
            "-r",
            str(workdir / "ref.fa"),
            "-n",
            "200",
            "-o",
            str(prefix),
            "--error-rate",
            "0.002",
            "--seed",
            "11",
        ]
    )
    assert rc == 0
    return prefix


class TestIndexCommands:
    def test_build_then_inspect(self, workdir, indexed, capsys):
        rc = main(["index", "inspect", str(indexed)])
        assert rc == 0
        info = json.loads(capsys.readouterr().out)
        assert info["filter_threshold"] == 500
        assert info["seed_len"] == 20
        assert info["hash_bits"] == 20
        assert info["sequences"] == [{"name": "chr1", "length": len(GENOME_TEXT)}]
        assert info["stats"]["total_locations"] > 0

    def test_inspect_missing_file_data_error(self, workdir):
        rc = main(["index", "inspect", str(workdir / "nope.gprx")])
        assert rc == 2

    def test_corrupt_index_data_error(self, workdir, indexed):
        bad = workdir / "bad.gprx"
        raw = bytearray(open(indexed, "rb").read())
        raw[-10] ^= 0xFF
        open(bad, "wb").write(raw)
        assert main(["index", "inspect", str(bad)]) == 2


class TestUsageErrors:
    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["index", "build", "-o", "x.gprx"])
        assert exc.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_bad_choice(self):
        with pytest.raises(SystemExit) as exc:
            main(["map", "-x", "a", "-r", "b", "-1", "c", "-2", "d", "-o", "e", "--cigar", "z"])
        assert exc.value.code == 1


class TestSimulateCommand:
    def test_outputs_exist(self, workdir, simulated):
        assert (workdir / "sim_1.fastq").exists()
        assert (workdir / "sim_2.fastq").exists()
        truth_lines = open(workdir / "sim_truth.tsv").read().strip().split("\n")
        assert len(truth_lines) == 201

    def test_gzip_mode(self, workdir):
        prefix = workdir / "simz"
        rc = main(
            ["simulate", "-r", str(workdir / "ref.fa"), "-n", "5", "-o", str(prefix), "--gzip"]
        )
        assert rc == 0
        with gzip.open(str(prefix) + "_1.fastq.gz", "rt") as fh:
            assert fh.readline().startswith("@sim0000000/1")


class TestMapCommand:
    def test_map_to_sam(self, workdir, indexed, simulated):
        out = workdir / "out.sam"
        rc = main(
            [
                "map",
                "-x",
                str(indexed),
                "-r",
                str(workdir / "ref.fa"),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                str(out),
            ]
        )
        assert rc == 0
        lines = open(out).read().strip().split("\n")
        assert lines[0].startswith("@HD")
        body = [l for l in lines if not l.startswith("@")]
        assert len(body) >= 380  # most of 200 pairs map at 0.2% error
        assert all(len(l.split("\t")) >= 13 for l in body)

    def test_threads_byte_identical(self, workdir, indexed, simulated):
        outs = []
        for threads in ("1", "4"):
            out = workdir / f"out_t{threads}.sam"
            rc = main(
                [
                    "map",
                    "-x",
                    str(indexed),
                    "-r",
                    str(workdir / "ref.fa"),
                    "-1",
                    str(workdir / "sim_1.fastq"),
                    "-2",
                    str(workdir / "sim_2.fastq"),
                    "-o",
                    str(out),
                    "--threads",
                    threads,
                    "--batch-size",
                    "32",
                ]
            )
            assert rc == 0
            outs.append(open(out, "rb").read())
        assert outs[0] == outs[1]

    def test_mismatched_seed_flags_data_error(self, workdir, indexed, simulated):
        rc = main(
            [
                "map",
                "-x",
                str(indexed),
                "-r",
                str(workdir / "ref.fa"),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                str(workdir / "bad.sam"),
                "--seed-len",
                "50",
            ]
        )
        assert rc == 2
        assert not (workdir / "bad.sam").exists()

    def test_wrong_reference_data_error(self, workdir, indexed, simulated, tmp_path):
        other = tmp_path / "other.fa"
        other.write_text(">chrX\n" + random_dna(np.random.default_rng(5), 500) + "\n")
        rc = main(
            [
                "map",
                "-x",
                str(indexed),
                "-r",
                str(other),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                str(workdir / "bad2.sam"),
            ]
        )
        assert rc == 2

    def test_residual_out(self, workdir, indexed, simulated):
        out = workdir / "with_res.sam"
        rc = main(
            [
                "map",
                "-x",
                str(indexed),
                "-r",
                str(workdir / "ref.fa"),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                str(out),
                "--residual-out",
                str(workdir / "res"),
            ]
        )
        assert rc == 0
        assert (workdir / "res_1.fastq.gz").exists()
        assert (workdir / "res_2.fastq.gz").exists()

    def test_stdout_mode(self, workdir, indexed, simulated, capsys):
        rc = main(
            [
                "map",
                "-x",
                str(indexed),
                "-r",
                str(workdir / "ref.fa"),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                "-",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("@HD")


class TestEnvPrecedence:
    def test_env_default_overridden_by_flag(self, workdir, monkeypatch):
        monkeypatch.setenv("GENPAIR_SEED_LEN", "25")
        idx = workdir / "env.gprx"
        rc = main(
            [
                "index",
                "build",
                "-r",
                str(workdir / "ref.fa"),
                "-o",
                str(idx),
                "--hash-bits",
                "18",
            ]
        )
        assert rc == 0
        from genpair.index import load

        assert load(str(idx)).cfg.seed_len == 25  # env applied
        rc = main(
            [
                "index",
                "build",
                "-r",
                str(workdir / "ref.fa"),
                "-o",
                str(idx),
                "--hash-bits",
                "18",
                "--seed-len",
                "30",
            ]
        )
        assert rc == 0
        assert load(str(idx)).cfg.seed_len == 30  # flag wins


class TestStatsCommand:
    def test_report_and_csv(self, workdir, indexed, simulated):
        report_path = workdir / "report.json"
        csv_path = workdir / "cdf.csv"
        rc = main(
            [
                "stats",
                "-x",
                str(indexed),
                "-r",
                str(workdir / "ref.fa"),
                "-1",
                str(workdir / "sim_1.fastq"),
                "-2",
                str(workdir / "sim_2.fastq"),
                "-o",
                str(report_path),
                "--cdf-csv",
                str(csv_path),
            ]
        )
        assert rc == 0
        report = json.loads(open(report_path).read())
        assert report["pairs_total"] == 200
        assert 0.9 <= report["exact_seed_pair_fraction"] <= 1.0
        assert open(csv_path).readline().startswith("min_pair_score")
