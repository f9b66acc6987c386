"""k-mer counting, pairwise k-mer similarity and k-mer rank.

Similarity between two sequences is the shared k-mer occurrence count
(sum of per-k-mer minima) over the number of windows in the shorter
sequence.  The rank of a sequence is ``ln(0.1 + D)`` where ``D`` is its mean
similarity to a reference set.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import EmptyReferenceSetError, OutOfRangeError, SequenceTooShortError
from .seqcore import Alphabet, Sequence

RANK_OFFSET = 0.1
RANK_MIN = math.log(RANK_OFFSET)
RANK_MAX = math.log(RANK_OFFSET + 1.0)


@dataclass(frozen=True)
class KmerConfig:
    kmer_len: int = 3
    exclude_self: bool = False

    def __post_init__(self):
        if self.kmer_len < 1:
            raise ValueError("kmer_len must be >= 1")


def default_kmer_config(alphabet: Alphabet) -> KmerConfig:
    return KmerConfig(3 if alphabet.kind == "Protein" else 6)


@dataclass(frozen=True)
class KmerCounts:
    counts: Counter
    total: int
    kmer_len: int


@dataclass(frozen=True)
class RankedSequence:
    sequence: Sequence
    mean_similarity: float
    rank: float

    @property
    def source_index(self):
        return self.sequence.source_index


def _check_length(seq: Sequence, k: int):
    if len(seq.residues) < k:
        raise SequenceTooShortError(seq.id, len(seq.residues), k)


def count_kmers(sequence: Sequence, config: KmerConfig) -> KmerCounts:
    k = config.kmer_len
    _check_length(sequence, k)
    s = sequence.residues
    counts = Counter(s[i : i + k] for i in range(len(s) - k + 1))
    return KmerCounts(counts, len(s) - k + 1, k)


def kmer_similarity(x: Sequence, y: Sequence, config: KmerConfig) -> float:
    cx = count_kmers(x, config)
    cy = count_kmers(y, config)
    if len(cx.counts) > len(cy.counts):
        cx, cy = cy, cx
    shared = sum(min(n, cy.counts[t]) for t, n in cx.counts.items() if t in cy.counts)
    return shared / (min(len(x), len(y)) - config.kmer_len + 1)


def _indicator_rows(seqs, k, vocab):
    # min(a, b) == sum over c >= 1 of [a >= c][b >= c], so shared-count sums
    # become dot products of 0/1 vectors keyed by (kmer, c)
    indptr, indices = [0], []
    for seq in seqs:
        s = seq.residues
        counts = Counter(s[i : i + k] for i in range(len(s) - k + 1))
        for kmer, n in counts.items():
            for c in range(1, n + 1):
                indices.append(vocab.setdefault((kmer, c), len(vocab)))
        indptr.append(len(indices))
    return indptr, indices


def shared_kmer_counts(xs, ys, config: KmerConfig) -> np.ndarray:
    """Integer matrix of ``sum_t min(n_x(t), n_y(t))`` for every x in xs, y in ys."""
    k = config.kmer_len
    for s in list(xs) + list(ys):
        _check_length(s, k)
    vocab: dict = {}
    px, ix = _indicator_rows(xs, k, vocab)
    py, iy = _indicator_rows(ys, k, vocab)
    ncol = max(len(vocab), 1)
    a = sparse.csr_matrix((np.ones(len(ix), np.int64), ix, px), shape=(len(xs), ncol))
    b = sparse.csr_matrix((np.ones(len(iy), np.int64), iy, py), shape=(len(ys), ncol))
    return np.asarray((a @ b.T).todense(), dtype=np.int64)


def similarity_matrix(xs, ys, config: KmerConfig) -> np.ndarray:
    """All-pairs :func:`kmer_similarity`, bit-identical to the scalar form."""
    xs, ys = list(xs), list(ys)
    if not xs or not ys:
        return np.zeros((len(xs), len(ys)))
    shared = shared_kmer_counts(xs, ys, config)
    lx = np.array([len(s) for s in xs], dtype=np.int64)
    ly = np.array([len(s) for s in ys], dtype=np.int64)
    denom = np.minimum.outer(lx, ly) - config.kmer_len + 1
    return shared.astype(np.float64) / denom.astype(np.float64)


def _mean_row(row, skip=None) -> float:
    total = 0.0
    m = 0
    for j, v in enumerate(row):
        if skip is not None and j in skip:
            continue
        total += v
        m += 1
    if m == 0:
        raise EmptyReferenceSetError("reference set is empty after excluding self")
    return total / m


def _self_positions(x: Sequence, refs) -> set:
    return {j for j, r in enumerate(refs) if r.id == x.id and r.source_index == x.source_index}


def mean_similarity(x: Sequence, reference_set, config: KmerConfig) -> float:
    refs = list(reference_set)
    if not refs:
        raise EmptyReferenceSetError("reference set is empty")
    row = similarity_matrix([x], refs, config)[0].tolist()
    skip = _self_positions(x, refs) if config.exclude_self else None
    return _mean_row(row, skip)


def kmer_rank(mean_sim: float) -> float:
    if not 0.0 <= mean_sim <= 1.0:
        raise OutOfRangeError(f"mean similarity {mean_sim} outside [0, 1]")
    return math.log(RANK_OFFSET + mean_sim)


def _rank_against(local, refs, config):
    local, refs = list(local), list(refs)
    if not refs:
        raise EmptyReferenceSetError("reference set is empty")
    sims = similarity_matrix(local, refs, config)
    out = []
    for seq, row in zip(local, sims.tolist()):
        skip = _self_positions(seq, refs) if config.exclude_self else None
        d = _mean_row(row, skip)
        out.append(RankedSequence(seq, d, kmer_rank(d)))
    return out


def rank_all_centralized(sequences, config: KmerConfig) -> list[RankedSequence]:
    """Rank each sequence against the full input list (itself included)."""
    seqs = list(sequences)
    if not seqs:
        raise EmptyReferenceSetError("no sequences to rank")
    return _rank_against(seqs, seqs, config)


def rank_all_vs_samples(local, samples, config: KmerConfig) -> list[RankedSequence]:
    """Rank each local sequence against the gathered sample set only."""
    return _rank_against(local, samples, config)


def sort_ranked(ranked) -> list[RankedSequence]:
    return sorted(ranked, key=lambda r: (r.rank, r.sequence.source_index))
