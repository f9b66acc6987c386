import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samplealign.errors import (
    DuplicateIdError,
    EmptyInputError,
    IllegalSymbolError,
    InvalidRatesError,
    RaggedAlignmentError,
    UnknownSymbolError,
)
from samplealign.seqcore import (
    DNA,
    PROTEIN,
    AlignedRow,
    Alignment,
    GenConfig,
    Sequence,
    check_degap,
    generate_family,
    parse_fasta,
    substitution_score,
    write_fasta,
)


def test_parse_single_record():
    (seq,) = parse_fasta(b">a\nACGT\n", DNA)
    assert seq == Sequence("a", "ACGT", 0)


def test_parse_keep_gaps_gives_alignment():
    aln = parse_fasta(b">a\nAC-G\n>b\nACTG\n", DNA, keep_gaps=True)
    assert isinstance(aln, Alignment)
    assert aln.width == 4
    assert aln.depth == 2


def test_ragged_alignment():
    with pytest.raises(RaggedAlignmentError):
        parse_fasta(b">a\nAC-G\n>b\nACTGA\n", DNA, keep_gaps=True)


def test_parse_details():
    seqs = parse_fasta(b">x desc here\r\nac\r\ngt\r\n>y\nA-C\n", DNA)
    assert [(s.id, s.residues, s.source_index) for s in seqs] == [("x", "ACGT", 0), ("y", "AC", 1)]


@pytest.mark.parametrize(
    "data, exc",
    [
        (b"", EmptyInputError),
        (b"ACGT\n", EmptyInputError),
        (b">a\nACGU\n", IllegalSymbolError),
        (b">a\nAC\n>a\nGT\n", DuplicateIdError),
        (b">a\n\n", EmptyInputError),
    ],
)
def test_parse_errors(data, exc):
    with pytest.raises(exc):
        parse_fasta(data, DNA)


def test_illegal_symbol_position():
    with pytest.raises(IllegalSymbolError) as info:
        parse_fasta(b">s1\nACZT\n", DNA)
    assert info.value.seq_id == "s1"
    assert info.value.position == 2


def test_write_fasta():
    assert write_fasta([Sequence("a", "ACGT")]) == b">a\nACGT\n"
    out = write_fasta([Sequence("a", "A" * 61)], wrap=60)
    assert out.split(b"\n")[1:3] == [b"A" * 60, b"A"]


seq_lists = st.lists(
    st.text(alphabet="ACGTN", min_size=1, max_size=150), min_size=1, max_size=6
).map(lambda xs: [Sequence(f"s{i}", x, i) for i, x in enumerate(xs)])


@given(seq_lists, st.integers(1, 80))
def test_fasta_round_trip_sequences(seqs, wrap):
    assert parse_fasta(write_fasta(seqs, wrap), DNA) == seqs


@given(st.integers(1, 5), st.integers(1, 40), st.data())
def test_fasta_round_trip_alignment(n, width, data):
    rows = []
    for i in range(n):
        text = data.draw(st.text(alphabet="ACGT-", min_size=width, max_size=width).filter(lambda t: t.strip("-")))
        rows.append(AlignedRow(f"r{i}", text, i))
    aln = Alignment(rows)
    assert parse_fasta(write_fasta(aln, 7), DNA, keep_gaps=True) == aln


def test_dna_scores(dna):
    assert substitution_score(dna, "-", "-") == 0
    assert substitution_score(dna, "A", "A") == 5
    assert substitution_score(dna, "A", "C") == -4
    assert substitution_score(dna, "A", "-") == -6
    assert substitution_score(dna, "N", "A") == 0


def test_blosum62(blosum):
    assert substitution_score(blosum, "W", "W") == 11
    assert substitution_score(blosum, "X", "W") == 0
    assert substitution_score(blosum, "C", "-") == -6
    for a in PROTEIN.extended:
        for b in PROTEIN.extended:
            assert blosum.score(a, b) == blosum.score(b, a)


def test_unknown_symbol(dna):
    with pytest.raises(UnknownSymbolError):
        dna.score("A", "U")


def test_generate_family_counts():
    leaves, true = generate_family(GenConfig(PROTEIN, tree_depth=3, root_length=30, seed=1))
    assert len(leaves) == 8
    assert check_degap(true, leaves)


def test_generate_no_mutation():
    leaves, true = generate_family(GenConfig(DNA, 4, 25, 0.0, 0.0, 0.0, seed=9))
    assert len({s.residues for s in leaves}) == 1
    assert true.width == 25
    assert all("-" not in r.text for r in true.rows)


def test_generate_deterministic():
    cfg = GenConfig(PROTEIN, 5, 60, 0.1, 0.05, 0.05, seed=42)
    a = generate_family(cfg)
    b = generate_family(cfg)
    assert write_fasta(a[0]) == write_fasta(b[0])
    assert write_fasta(a[1]) == write_fasta(b[1])
    assert write_fasta(generate_family(GenConfig(PROTEIN, 5, 60, 0.1, 0.05, 0.05, seed=43))[0]) != write_fasta(a[0])


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(1, 40),
    st.floats(0, 0.3),
    st.floats(0, 0.3),
    st.floats(0, 0.3),
    st.integers(0, 2**32),
)
def test_generated_true_alignment_degaps(depth, length, s, i, d, seed):
    leaves, true = generate_family(GenConfig(DNA, depth, length, s, i, d, seed))
    assert len(leaves) == 2**depth
    assert check_degap(true, leaves)
    assert all(len(x) >= 1 for x in leaves)
    # no all-gap columns in the true alignment
    assert all(any(r.text[c] != "-" for r in true.rows) for c in range(true.width))


def test_invalid_rates():
    with pytest.raises(InvalidRatesError):
        GenConfig(DNA, 2, 10, 0.5, 0.4, 0.2)
