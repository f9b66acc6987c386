import json
import math

import pytest

from samplealign.cli import main
from samplealign.kmer import KmerConfig
from samplealign.msa import progressive_align
from samplealign.pipeline import PHASES
from samplealign.quality import RANK_STATS_FIELDS, TABLE1_FIELDS
from samplealign.seqcore import DNA, PROTEIN, Sequence, blosum62, read_fasta, write_fasta

from conftest import DATA, cli, cli_tcp_align, family


@pytest.fixture
def fam(tmp_path):
    leaves, true = family(4, 60, seed=5)
    path = tmp_path / "in.fasta"
    path.write_bytes(write_fasta(leaves))
    ref = tmp_path / "true.fasta"
    ref.write_bytes(write_fasta(true))
    return path, ref, leaves


def test_align_p1_matches_sequential(fam, tmp_path, capsys):
    path, _, leaves = fam
    out = tmp_path / "out.fasta"
    assert main(["align", "--input", str(path), "--output", str(out), "--workers", "1"]) == 0
    assert out.read_bytes() == write_fasta(progressive_align(leaves, KmerConfig(3), blosum62()))
    assert "dp_cells=" in capsys.readouterr().err


def test_align_golden_with_metrics(tmp_path, capsys):
    out = tmp_path / "out.fasta"
    metrics = tmp_path / "m.jsonl"
    rc = main(["align", "--input", str(DATA / "family_d6.fasta"), "--output", str(out),
               "--workers", "4", "--metrics", str(metrics)])
    assert rc == 0
    assert out.read_bytes() == (DATA / "golden_p4_d6.fasta").read_bytes()
    records = [json.loads(line) for line in metrics.read_text().splitlines()]
    assert [r["name"] for r in records] == list(PHASES)
    assert set(records[0]) == {"name", "wall_ms", "dp_cells", "bytes_sent"}
    err = capsys.readouterr().err
    sizes = next(line for line in err.splitlines() if line.startswith("bucket_sizes="))
    assert sum(map(int, sizes.split("=")[1].split(","))) == 64


def test_align_tcp_processes(tmp_path):
    out = tmp_path / "tcp.fasta"
    rc, codes = cli_tcp_align(DATA / "family_d6.fasta", out, 4)
    assert (rc, codes) == (0, [0, 0, 0])
    assert out.read_bytes() == (DATA / "golden_p4_d6.fasta").read_bytes()


def test_gen(tmp_path):
    a, b = tmp_path / "a.fasta", tmp_path / "b.fasta"
    args = ["gen", "--count-exponent", "3", "--length", "40", "--seed", "7", "--output", str(a), "--true-alignment", str(b)]
    assert main(args) == 0
    leaves = read_fasta(a, PROTEIN)
    true = read_fasta(b, PROTEIN, keep_gaps=True)
    assert len(leaves) == 8
    assert [r.ungapped() for r in true.rows] == [s.residues for s in leaves]
    first = a.read_bytes(), b.read_bytes()
    assert main(args) == 0
    assert (a.read_bytes(), b.read_bytes()) == first


def test_score(tmp_path, capsys):
    aln = tmp_path / "aa.fasta"
    aln.write_text(">a\nAA\n>b\nAA\n")
    assert main(["score", "--test", str(aln), "--metric", "sp", "--matrix", "dna"]) == 0
    assert capsys.readouterr().out == "sp=10\n"
    assert main(["score", "--test", str(aln), "--ref", str(aln), "--metric", "q", "--alphabet", "dna"]) == 0
    assert capsys.readouterr().out == "q=1.000000\n"
    other = tmp_path / "other.fasta"
    other.write_text(">a\nAA\n>c\nAA\n")
    assert main(["score", "--test", str(other), "--ref", str(aln), "--alphabet", "dna"]) == 2


def test_rank_central_single(tmp_path, capsys):
    path = tmp_path / "one.fasta"
    path.write_bytes(write_fasta([Sequence("only", "MKVLAAGHH")]))
    assert main(["rank", "--input", str(path), "--mode", "central"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == f"only\t{math.log(1.1):.6f}"


def test_rank_globalized(fam, capsys):
    path, _, _ = fam
    assert main(["rank", "--input", str(path), "--mode", "globalized", "--workers", "2", "--samples", "3"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 17


def test_rank_compare_degenerate(fam, capsys):
    path, _, _ = fam
    assert main(["rank", "--input", str(path), "--compare", "--workers", "4", "--samples", "all"]) == 0
    out = capsys.readouterr().out
    for label in (*TABLE1_FIELDS, *RANK_STATS_FIELDS):
        assert label + "=" in out
    assert "variance_diff=0.000000" in out and "stddev_diff=0.000000" in out


def test_bench_single_row(fam, capsys):
    path, _, _ = fam
    assert main(["bench", "--input", str(path), "--workers-list", "1"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0].split("\t") == ["workers", "wall_ms", "dp_cells", "max_bucket", "bucket_total"]
    assert len(rows) == 2 and rows[1].split("\t")[-1] == "16"


def test_bench_dp_cells_decrease_with_workers(tmp_path, capsys):
    leaves, _ = family(9, 120, seed=0)
    path = tmp_path / "n512.fasta"
    path.write_bytes(write_fasta(leaves))
    assert main(["bench", "--input", str(path), "--workers-list", "1,2,4,8"]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()[1:]]
    assert all(int(r[4]) == 512 for r in rows)
    cells = [int(r[2]) for r in rows]
    assert all(a > b for a, b in zip(cells, cells[1:])), cells


def test_exit_codes(tmp_path, fam):
    path, _, _ = fam
    assert cli("align", "--bogus").returncode == 1
    assert cli("frobnicate").returncode == 1
    bad = tmp_path / "bad.fasta"
    bad.write_text(">a\nACGU\n")
    r = cli("align", "--input", bad, "--output", tmp_path / "o", "--alphabet", "dna")
    assert r.returncode == 2 and "U" in r.stderr
    r = cli("align", "--input", tmp_path / "missing.fasta", "--output", tmp_path / "o")
    assert r.returncode == 2
    r = cli("align", "--input", path, "--output", tmp_path / "o", "--workers", "8")
    assert r.returncode == 2 and "fewer workers" in r.stderr
    # nothing listens on port 1
    r = cli("align", "--backend", "tcp", "--role", "worker", "--connect", "127.0.0.1:1", "--timeout", "1")
    assert r.returncode == 3


def test_module_entry_point():
    r = cli("--version")
    assert r.returncode == 0 and r.stdout.startswith("samplealign ")
