"""Regular-sampling partitioning of ranked sequences into worker buckets."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

from .errors import InsufficientSequencesError, WrongSampleCardinalityError
from .kmer import RankedSequence


@dataclass(frozen=True)
class PartitionConfig:
    worker_count: int = 1
    # None means the default, min(max(p - 1, 8), local set size)
    sample_count: int | None = None

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.sample_count is not None and self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def resolve_sample_count(self, local_size: int) -> int:
        if self.sample_count is not None:
            return self.sample_count
        return min(max(self.worker_count - 1, 8), local_size)


@dataclass(frozen=True)
class PivotSet:
    pivots: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pivots", tuple(self.pivots))
        if any(a > b for a, b in zip(self.pivots, self.pivots[1:])):
            raise ValueError("pivots must be nondecreasing")

    def __len__(self):
        return len(self.pivots)

    @property
    def worker_count(self):
        return len(self.pivots) + 1


@dataclass
class BucketAssignment:
    buckets: list[list[RankedSequence]] = field(default_factory=list)

    def sizes(self) -> list[int]:
        return [len(b) for b in self.buckets]


@dataclass(frozen=True)
class LoadReport:
    max_bucket: int
    bound_2w: int
    holds: bool


def sample_indices(w: int, count: int) -> list[int]:
    """1-based positions floor(j*w/(count+1)), clamped to [1, w]."""
    return [min(max((j * w) // (count + 1), 1), w) for j in range(1, count + 1)]


def select_local_samples(sorted_local, count: int):
    items = list(sorted_local)
    w = len(items)
    if count > w:
        raise InsufficientSequencesError(f"cannot take {count} samples from {w} sequences")
    return [items[i - 1] for i in sample_indices(w, count)]


def pivot_indices(p: int) -> list[int]:
    return [p // 2 + i * p for i in range(p - 1)]


def select_pivots(gathered_ranks, p: int) -> PivotSet:
    ranks = sorted(gathered_ranks)
    if p == 1:
        return PivotSet()
    if len(ranks) != p * (p - 1):
        raise WrongSampleCardinalityError(f"expected {p * (p - 1)} ranks for p={p}, got {len(ranks)}")
    return PivotSet(ranks[i - 1] for i in pivot_indices(p))


def bucket_of(rank: float, pivots: PivotSet) -> int:
    # bisect_left gives the first pivot >= rank, so ties land in the lower bucket
    return bisect.bisect_left(pivots.pivots, rank)


def partition_set(ranked, pivots: PivotSet) -> BucketAssignment:
    buckets = [[] for _ in range(pivots.worker_count)]
    for item in ranked:
        buckets[bucket_of(item.rank, pivots)].append(item)
    for b in buckets:
        b.sort(key=lambda r: (r.rank, r.sequence.source_index))
    return BucketAssignment(buckets)


def check_load_bound(assignment, n: int, p: int) -> LoadReport:
    sizes = assignment.sizes() if isinstance(assignment, BucketAssignment) else list(assignment)
    largest = max(sizes, default=0)
    bound = 2 * math.ceil(n / p)
    return LoadReport(largest, bound, largest < bound)
