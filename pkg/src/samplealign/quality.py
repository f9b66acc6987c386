"""Alignment accuracy (Q-score), rank-distribution statistics and reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

from .errors import EmptyReferenceError, IdMismatchError, LengthMismatchError, SequenceMismatchError
from .seqcore import GAP, Alignment


class ResiduePair(NamedTuple):
    row_a: int
    pos_a: int
    row_b: int
    pos_b: int


def residue_pairs(alignment: Alignment, order=None) -> set[ResiduePair]:
    """Residue pairs sharing a column, positions counted in de-gapped sequences.

    Rows are numbered by ``order`` (a list of ids) when given, otherwise by
    their position in the alignment.
    """
    rows = alignment.rows
    if order is not None:
        rank = {seq_id: i for i, seq_id in enumerate(order)}
        numbers = [rank[r.id] for r in rows]
    else:
        numbers = list(range(len(rows)))
    counters = [0] * len(rows)
    pairs = set()
    for col in range(alignment.width):
        present = []
        for k, row in enumerate(rows):
            if row.text[col] != GAP:
                present.append((numbers[k], counters[k]))
                counters[k] += 1
        present.sort()
        for (ra, pa), (rb, pb) in combinations(present, 2):
            pairs.add(ResiduePair(ra, pa, rb, pb))
    return pairs


def q_score(test: Alignment, reference: Alignment) -> float:
    """Fraction of reference residue pairs that the test alignment reproduces."""
    ref_seqs = {r.id: r.ungapped() for r in reference.rows}
    test_seqs = {r.id: r.ungapped() for r in test.rows}
    if set(ref_seqs) != set(test_seqs) or len(test.rows) != len(reference.rows):
        missing = sorted(set(ref_seqs) ^ set(test_seqs))
        raise IdMismatchError(f"alignments disagree on ids: {missing[:5]}")
    for seq_id, residues in ref_seqs.items():
        if test_seqs[seq_id] != residues:
            raise SequenceMismatchError(f"sequence {seq_id!r} differs between alignments")
    order = reference.ids()
    ref_pairs = residue_pairs(reference, order)
    if not ref_pairs:
        raise EmptyReferenceError("reference alignment has no aligned residue pairs")
    return len(residue_pairs(test, order) & ref_pairs) / len(ref_pairs)


@dataclass(frozen=True)
class RankStats:
    max_a: float
    min_a: float
    mean_a: float
    max_b: float
    min_b: float
    mean_b: float
    variance_diff: float
    stddev_diff: float

    def report(self) -> str:
        return (
            f"(Maximum, Minimum) Central=({self.max_a:.6f}, {self.min_a:.6f})\n"
            f"Average Centralized={self.mean_a:.6f}\n"
            f"(Maximum, Minimum) Globalized=({self.max_b:.6f}, {self.min_b:.6f})\n"
            f"Average Globalized={self.mean_b:.6f}\n"
            f"Variance w.r.t. Centralized={self.variance_diff:.6f}\n"
            f"Standard Dev. w.r.t Centralized={self.stddev_diff:.6f}\n"
        ) + "".join(f"{name}={getattr(self, name):.6f}\n" for name in RANK_STATS_FIELDS)


TABLE1_FIELDS = (
    "(Maximum, Minimum) Central",
    "Average Centralized",
    "(Maximum, Minimum) Globalized",
    "Average Globalized",
    "Variance w.r.t. Centralized",
    "Standard Dev. w.r.t Centralized",
)


RANK_STATS_FIELDS = tuple(RankStats.__dataclass_fields__)


def rank_stats(a, b) -> RankStats:
    """``a`` centralized ranks, ``b`` globalized ranks, paired by sequence.

    Variance is the population variance of ``b - a``.
    """
    a, b = list(a), list(b)
    if len(a) != len(b) or not a:
        raise LengthMismatchError(f"rank vectors have lengths {len(a)} and {len(b)}")
    diffs = [y - x for x, y in zip(a, b)]
    mean_d = sum(diffs) / len(diffs)
    var = sum((d - mean_d) ** 2 for d in diffs) / len(diffs)
    return RankStats(
        max(a), min(a), sum(a) / len(a),
        max(b), min(b), sum(b) / len(b),
        var, math.sqrt(var),
    )


@dataclass(frozen=True)
class Comparison:
    q_pipeline: float
    q_sequential: float

    @property
    def ratio(self) -> float:
        return self.q_pipeline / self.q_sequential if self.q_sequential else math.nan

    def report(self) -> str:
        return f"q_pipeline={self.q_pipeline:.6f}\nq_sequential={self.q_sequential:.6f}\nratio={self.ratio:.6f}\n"


def compare_runs(pipeline_alignment: Alignment, sequential_alignment: Alignment, reference: Alignment) -> Comparison:
    return Comparison(q_score(pipeline_alignment, reference), q_score(sequential_alignment, reference))
