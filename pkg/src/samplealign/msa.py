"""Built-in sequential aligner and the template realignment used to glue
per-worker alignments together.

Profiles are kept as integer symbol counts rather than frequencies.  Column
scores are then exact integers scaled by ``depth_a * depth_b``, so the DP
has no rounding and ties are decided exactly.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignerFailedError,
    AllGapConsensusError,
    EmptyAlignmentError,
    EmptyProfileError,
    TemplateWidthMismatchError,
    UnknownSymbolError,
)
from .kmer import KmerConfig, similarity_matrix
from .seqcore import (
    GAP,
    AlignedRow,
    Alignment,
    Alphabet,
    Sequence,
    SubstitutionMatrix,
    parse_fasta,
    write_fasta,
)

MATCH = "M"
GAP_IN_A = "A"  # column of b against a gap in a
GAP_IN_B = "B"  # column of a against a gap in b


@dataclass
class WorkCounter:
    dp_cells: int = 0


# ---------------------------------------------------------------------------
# encoding helpers


def _lookup(alphabet: Alphabet) -> np.ndarray:
    table = np.full(256, 255, dtype=np.uint8)
    for i, s in enumerate(alphabet.extended):
        table[ord(s)] = i
    return table


def encode_rows(texts, alphabet: Alphabet) -> np.ndarray:
    if not texts:
        return np.zeros((0, 0), dtype=np.uint8)
    raw = np.frombuffer("".join(texts).encode("ascii"), dtype=np.uint8).reshape(len(texts), -1)
    codes = _lookup(alphabet)[raw]
    if (codes == 255).any():
        bad = chr(int(raw[codes == 255][0]))
        raise UnknownSymbolError(f"symbol {bad!r} not in {alphabet.kind} alphabet")
    return codes


def decode_rows(codes: np.ndarray, alphabet: Alphabet) -> list[str]:
    chars = np.frombuffer(alphabet.extended.encode("ascii"), dtype=np.uint8)
    return [row.tobytes().decode("ascii") for row in chars[codes]]


def _column_counts(codes: np.ndarray, nsym: int) -> np.ndarray:
    width = codes.shape[1]
    counts = np.zeros((width, nsym), dtype=np.int64)
    cols = np.broadcast_to(np.arange(width), codes.shape)
    np.add.at(counts, (cols.ravel(), codes.ravel().astype(np.intp)), 1)
    return counts


# ---------------------------------------------------------------------------
# distance matrix and guide tree


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray

    @property
    def n(self):
        return self.d.shape[0]


def build_distance_matrix(sequences, kmer_config: KmerConfig) -> DistanceMatrix:
    seqs = list(sequences)
    d = 1.0 - similarity_matrix(seqs, seqs, kmer_config)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


@dataclass(frozen=True)
class GuideTree:
    """Leaves are ``0..n-1``; internal node ``n + t`` is the t-th join."""

    n: int
    joins: tuple[tuple[int, int, float], ...] = ()

    @property
    def root(self) -> int:
        return self.n + len(self.joins) - 1 if self.joins else 0

    def height(self, node: int) -> float:
        return 0.0 if node < self.n else self.joins[node - self.n][2]


def upgma(matrix: DistanceMatrix) -> GuideTree:
    n = matrix.n
    if n <= 1:
        return GuideTree(n)
    d = np.triu(np.asarray(matrix.d, dtype=np.float64), 1)
    d[np.tril_indices(n)] = np.inf
    node = list(range(n))
    size = [1] * n
    joins = []
    for step in range(n - 1):
        flat = int(np.argmin(d))
        i, j = divmod(flat, n)
        height = d[i, j] / 2.0
        joins.append((node[i], node[j], float(height)))
        row_i = np.minimum(d[i, :], d[:, i])
        row_j = np.minimum(d[j, :], d[:, j])
        merged = (size[i] * row_i + size[j] * row_j) / (size[i] + size[j])
        d[i, i + 1 :] = merged[i + 1 :]
        d[:i, i] = merged[:i]
        d[j, :] = np.inf
        d[:, j] = np.inf
        d[i, i] = np.inf
        node[i] = n + step
        size[i] += size[j]
    return GuideTree(n, tuple(joins))


# ---------------------------------------------------------------------------
# profiles and profile-profile DP


@dataclass(frozen=True)
class Profile:
    """Per-column symbol counts over ``alphabet.extended`` (gap last)."""

    counts: np.ndarray
    depth: int
    alphabet: Alphabet

    @property
    def width(self) -> int:
        return self.counts.shape[0]

    @property
    def columns(self) -> np.ndarray:
        return self.counts / float(self.depth)


def profile_from_alignment(alignment: Alignment, alphabet: Alphabet) -> Profile:
    if not alignment.rows:
        raise EmptyAlignmentError("cannot build a profile from an empty alignment")
    codes = encode_rows([r.text for r in alignment.rows], alphabet)
    return Profile(_column_counts(codes, len(alphabet.extended)), alignment.depth, alphabet)


@dataclass(frozen=True)
class ProfileAlignment:
    path: str
    raw_score: int
    scale: int
    cells: int

    @property
    def score(self) -> float:
        return self.raw_score / self.scale


def _check_profile(p: Profile):
    if p.depth < 1 or p.width < 1:
        raise EmptyProfileError("profile has no columns")


def align_profiles(a: Profile, b: Profile, matrix: SubstitutionMatrix) -> ProfileAlignment:
    """Global linear-gap alignment of two profiles.

    Column pairs score the expected substitution score between a random row
    of ``a`` and a random row of ``b``.  Among optimal paths, tracebacks
    prefer match, then a gap in ``b``, then a gap in ``a``.
    """
    _check_profile(a)
    _check_profile(b)
    table = matrix.table
    ca, cb = a.counts, b.counts
    da, db = a.depth, b.depth
    la, lb = ca.shape[0], cb.shape[0]

    pair = ca @ table @ cb.T
    gap_col = table[:, -1]
    gap_in_b = (ca @ gap_col) * db
    gap_in_a = (cb @ gap_col) * da

    prefix = np.zeros(lb + 1, dtype=np.int64)
    np.cumsum(gap_in_a, out=prefix[1:])
    h = np.empty((la + 1, lb + 1), dtype=np.int64)
    h[0] = prefix
    v = np.empty(lb + 1, dtype=np.int64)
    for i in range(1, la + 1):
        prev = h[i - 1]
        g = gap_in_b[i - 1]
        v[0] = prev[0] + g
        np.maximum(prev[:-1] + pair[i - 1], prev[1:] + g, out=v[1:])
        # horizontal runs: h[j] = max_k v[k] + prefix[j] - prefix[k]
        h[i] = np.maximum.accumulate(v - prefix) + prefix

    steps = []
    i, j = la, lb
    while i > 0 or j > 0:
        here = h[i, j]
        if i > 0 and j > 0 and here == h[i - 1, j - 1] + pair[i - 1, j - 1]:
            steps.append(MATCH)
            i -= 1
            j -= 1
        elif i > 0 and here == h[i - 1, j] + gap_in_b[i - 1]:
            steps.append(GAP_IN_B)
            i -= 1
        else:
            steps.append(GAP_IN_A)
            j -= 1
    return ProfileAlignment("".join(reversed(steps)), int(h[la, lb]), da * db, la * lb)


def path_indices(path: str):
    """Column index arrays for each side of a path; -1 marks an inserted gap."""
    arr = np.frombuffer(path.encode("ascii"), dtype=np.uint8)
    takes_a = arr != ord(GAP_IN_A)
    takes_b = arr != ord(GAP_IN_B)
    ia = np.where(takes_a, np.cumsum(takes_a) - 1, -1)
    ib = np.where(takes_b, np.cumsum(takes_b) - 1, -1)
    return ia, ib


def _gather_columns(codes: np.ndarray, idx: np.ndarray, gap_code: int) -> np.ndarray:
    padded = np.concatenate([codes, np.full((codes.shape[0], 1), gap_code, codes.dtype)], axis=1)
    return padded[:, np.where(idx < 0, codes.shape[1], idx)]


def _gather_counts(counts: np.ndarray, depth: int, idx: np.ndarray) -> np.ndarray:
    gap_row = np.zeros((1, counts.shape[1]), dtype=counts.dtype)
    gap_row[0, -1] = depth
    return np.concatenate([counts, gap_row])[np.where(idx < 0, counts.shape[0], idx)]


# ---------------------------------------------------------------------------
# progressive alignment


def progressive_align(sequences, kmer_config: KmerConfig, matrix: SubstitutionMatrix, counter=None) -> Alignment:
    """k-mer distances, UPGMA guide tree, then post-order profile merging.

    Input order is irrelevant: sequences are processed in ``source_index``
    order and output rows come back in that order.
    """
    seqs = sorted(sequences, key=lambda s: (s.source_index, s.id))
    if not seqs:
        return Alignment()
    if len(seqs) == 1:
        return Alignment.from_sequence(seqs[0])
    alphabet = matrix.alphabet
    nsym = len(alphabet.extended)
    gap_code = nsym - 1

    tree = upgma(build_distance_matrix(seqs, kmer_config))
    clusters = {}
    for i, s in enumerate(seqs):
        codes = encode_rows([s.residues], alphabet)
        clusters[i] = (codes, _column_counts(codes, nsym), [i])
    for t, (left, right, _) in enumerate(tree.joins):
        codes_a, counts_a, rows_a = clusters.pop(left)
        codes_b, counts_b, rows_b = clusters.pop(right)
        da, db = len(rows_a), len(rows_b)
        result = align_profiles(Profile(counts_a, da, alphabet), Profile(counts_b, db, alphabet), matrix)
        if counter is not None:
            counter.dp_cells += result.cells
        ia, ib = path_indices(result.path)
        codes = np.concatenate(
            [_gather_columns(codes_a, ia, gap_code), _gather_columns(codes_b, ib, gap_code)]
        )
        counts = _gather_counts(counts_a, da, ia) + _gather_counts(counts_b, db, ib)
        clusters[tree.n + t] = (codes, counts, rows_a + rows_b)

    codes, _, order = clusters[tree.root]
    final = np.empty_like(codes)
    final[order] = codes
    texts = decode_rows(final, alphabet)
    return Alignment(AlignedRow(s.id, t, s.source_index) for s, t in zip(seqs, texts))


def run_external_aligner(command: str, sequences, alphabet: Alphabet) -> Alignment:
    """Align with an external program: FASTA on stdin, aligned FASTA on stdout."""
    seqs = sorted(sequences, key=lambda s: (s.source_index, s.id))
    if len(seqs) <= 1:
        return Alignment(AlignedRow(s.id, s.residues, s.source_index) for s in seqs)
    try:
        proc = subprocess.run(shlex.split(command), input=write_fasta(seqs), capture_output=True, check=False)
    except OSError as exc:
        raise AlignerFailedError(f"could not run {command!r}: {exc}") from exc
    if proc.returncode != 0:
        msg = proc.stderr.decode("utf-8", "replace").strip()
        raise AlignerFailedError(f"{command!r} exited with {proc.returncode}: {msg}")
    try:
        aln = parse_fasta(proc.stdout, alphabet, keep_gaps=True)
    except Exception as exc:
        raise AlignerFailedError(f"unreadable output from {command!r}: {exc}") from exc
    by_id = {s.id: s for s in seqs}
    rows = []
    for row in aln.rows:
        src = by_id.get(row.id)
        if src is None or row.ungapped() != src.residues:
            raise AlignerFailedError(f"external aligner altered sequence {row.id!r}")
        rows.append(AlignedRow(row.id, row.text, src.source_index))
    if len(rows) != len(seqs):
        raise AlignerFailedError("external aligner dropped sequences")
    return Alignment(rows).sorted_by_source()


# ---------------------------------------------------------------------------
# ancestors and template realignment


def consensus(alignment: Alignment, alphabet: Alphabet, seq_id: str = "ancestor", source_index: int = 0) -> Sequence:
    """Majority residue per column, dropping columns that are mostly gap."""
    if not alignment.rows:
        raise EmptyAlignmentError("consensus of an empty alignment")
    if alignment.depth == 1:
        return Sequence(seq_id, alignment.rows[0].ungapped(), source_index)
    prof = profile_from_alignment(alignment, alphabet)
    counts = prof.counts
    keep = counts[:, -1] * 2 <= prof.depth
    if not keep.any():
        raise AllGapConsensusError("every column is majority gap")
    # argmax returns the first maximum, i.e. the earliest symbol in alphabet order
    best = np.argmax(counts[keep, :-1], axis=1)
    residues = "".join(alphabet.symbols[k] for k in best)
    return Sequence(seq_id, residues, source_index)


@dataclass(frozen=True)
class TweakedAlignment:
    worker_id: int
    ga_width: int
    rows: Alignment
    insert_counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "insert_counts", tuple(self.insert_counts))
        if len(self.insert_counts) != self.ga_width + 1:
            raise TemplateWidthMismatchError("insert_counts must have ga_width + 1 slots")
        if self.rows.rows and self.rows.width != self.ga_width + sum(self.insert_counts):
            raise TemplateWidthMismatchError("row width disagrees with template and insertions")


def realign_to_template(local: Alignment, ga: Profile, matrix: SubstitutionMatrix, worker_id: int = 0, counter=None) -> TweakedAlignment:
    """Express a local alignment in the column space of a fixed template.

    Template columns the local alignment lacks become all-gap columns; local
    columns without a template partner are recorded as insertions in the slot
    before the next template column.
    """
    _check_profile(ga)
    if not local.rows:
        raise EmptyProfileError("local alignment is empty")
    alphabet = matrix.alphabet
    prof = profile_from_alignment(local, alphabet)
    result = align_profiles(prof, ga, matrix)
    if counter is not None:
        counter.dp_cells += result.cells
    inserts = [0] * (ga.width + 1)
    consumed = 0
    for step in result.path:
        if step == GAP_IN_B:
            inserts[consumed] += 1
        else:
            consumed += 1
    ia, _ = path_indices(result.path)
    codes = encode_rows([r.text for r in local.rows], alphabet)
    texts = decode_rows(_gather_columns(codes, ia, len(alphabet.extended) - 1), alphabet)
    rows = Alignment(AlignedRow(r.id, t, r.source_index) for r, t in zip(local.rows, texts))
    return TweakedAlignment(worker_id, ga.width, rows, inserts)


def merge_tweaked(parts, ga_width: int) -> Alignment:
    parts = list(parts)
    for part in parts:
        if part.ga_width != ga_width:
            raise TemplateWidthMismatchError(f"part from worker {part.worker_id} has template width {part.ga_width}, expected {ga_width}")
    slot_max = [0] * (ga_width + 1)
    for part in parts:
        slot_max = [max(m, c) for m, c in zip(slot_max, part.insert_counts)]
    starts = []
    pos = 0
    for s in range(ga_width + 1):
        starts.append(pos)
        pos += slot_max[s] + (1 if s < ga_width else 0)
    width = pos

    rows = []
    for part in parts:
        if not part.rows.rows:
            continue
        mapping = []
        for s in range(ga_width + 1):
            mapping.extend(range(starts[s], starts[s] + part.insert_counts[s]))
            if s < ga_width:
                mapping.append(starts[s] + slot_max[s])
        mapping = np.asarray(mapping, dtype=np.intp)
        texts = [r.text for r in part.rows.rows]
        src = np.frombuffer("".join(texts).encode("ascii"), dtype=np.uint8).reshape(len(texts), -1)
        out = np.full((len(texts), width), ord(GAP), dtype=np.uint8)
        out[:, mapping] = src
        for r, line in zip(part.rows.rows, out):
            rows.append(AlignedRow(r.id, line.tobytes().decode("ascii"), r.source_index))
    rows.sort(key=lambda r: (r.source_index, r.id))
    return Alignment(rows)


def sp_score(alignment: Alignment, matrix: SubstitutionMatrix) -> int:
    """Sum of pairwise substitution scores over all columns (gap/gap = 0)."""
    if not alignment.rows:
        raise EmptyAlignmentError("sum-of-pairs of an empty alignment")
    codes = encode_rows([r.text for r in alignment.rows], matrix.alphabet)
    counts = _column_counts(codes, len(matrix.alphabet.extended))
    table = matrix.table
    twice = int(((counts @ table) * counts).sum()) - int((counts @ np.diag(table)).sum())
    return twice // 2
