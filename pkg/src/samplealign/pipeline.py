"""The distributed alignment pipeline.

Every worker runs :func:`sample_align_d` with its own communicator.  The
root (worker 0) receives the input and configuration, shards the input into
contiguous blocks, and ends up holding the glued alignment.

Worker flow, after setup:

1. rank the local block against itself, sort by rank
2. pick evenly spaced local samples and all-gather them
3. re-rank every local sequence against the gathered samples, re-sort
4. send p-1 regular samples of the new ranks to the root
5. root picks p-1 pivots and broadcasts them
6. bucket locally and exchange buckets all-to-all
7. align the received bucket
8. send the bucket's consensus (local ancestor) to the root
9. root aligns the ancestors; the profile of that alignment is the
   template ("global ancestor"), broadcast to all workers
10. realign the local alignment against the template
11. root merges the realigned parts

With one worker none of this applies and the result is exactly
:func:`~samplealign.msa.progressive_align` of the input.
"""

from __future__ import annotations

import json
import logging
import struct
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

from .errors import AllGapConsensusError, InsufficientSequencesError
from .kmer import KmerConfig, default_kmer_config, rank_all_centralized, rank_all_vs_samples, sort_ranked
from .msa import (
    Profile,
    TweakedAlignment,
    WorkCounter,
    consensus,
    merge_tweaked,
    profile_from_alignment,
    progressive_align,
    realign_to_template,
    run_external_aligner,
)
from .partition import PartitionConfig, PivotSet, partition_set, select_local_samples, select_pivots
from .seqcore import ALPHABETS, MATRICES, Alignment, Alphabet, Sequence, SubstitutionMatrix
from .transport import MsgType, TcpCommunicator, run_local
from .transport import wire

log = logging.getLogger(__name__)

PHASES = (
    "local_rank",
    "sample_exchange",
    "global_rank",
    "pivots",
    "redistribute",
    "local_align",
    "ancestors",
    "global_ancestor",
    "realign",
    "glue",
)


@dataclass(frozen=True)
class PipelineConfig:
    alphabet: str = "protein"
    kmer_len: int | None = None
    worker_count: int = 1
    # None: min(max(p - 1, 8), N // p); the root resolves it before broadcasting
    sample_count: int | None = None
    matrix: str | None = None
    gap_penalty: int = 6
    external_aligner: str | None = None
    backend: str = "local"
    seed: int = 0

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.alphabet not in ALPHABETS:
            raise ValueError(f"unknown alphabet {self.alphabet!r}")
        if self.backend not in ("local", "tcp"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def alphabet_obj(self) -> Alphabet:
        return ALPHABETS[self.alphabet]

    @property
    def kmer_config(self) -> KmerConfig:
        if self.kmer_len is None:
            return default_kmer_config(self.alphabet_obj)
        return KmerConfig(self.kmer_len)

    @property
    def partition_config(self) -> PartitionConfig:
        return PartitionConfig(self.worker_count, self.sample_count)

    def substitution_matrix(self) -> SubstitutionMatrix:
        name = self.matrix or ("blosum62" if self.alphabet == "protein" else "dna")
        m = MATRICES[name](gap_penalty=self.gap_penalty)
        if m.alphabet != self.alphabet_obj:
            raise ValueError(f"matrix {name!r} does not match alphabet {self.alphabet!r}")
        return m


@dataclass
class PhaseRecord:
    name: str
    wall_ms: float = 0.0
    dp_cells: int = 0
    bytes_sent: int = 0


@dataclass
class RunMetrics:
    n: int = 0
    worker_count: int = 1
    dp_cells: int = 0
    bytes_sent: int = 0
    bucket_sizes: list[int] = field(default_factory=list)
    phases: list[PhaseRecord] = field(default_factory=list)

    @property
    def wall_ms(self) -> float:
        return sum(p.wall_ms for p in self.phases)

    def report(self) -> str:
        lines = [
            f"n={self.n}",
            f"workers={self.worker_count}",
            f"dp_cells={self.dp_cells}",
            f"bytes_sent={self.bytes_sent}",
            "bucket_sizes=" + ",".join(map(str, self.bucket_sizes)),
            f"max_bucket={max(self.bucket_sizes, default=0)}",
        ]
        lines += [f"wall_ms.{p.name}={p.wall_ms:.3f}" for p in self.phases]
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"name": p.name, "wall_ms": round(p.wall_ms, 3), "dp_cells": p.dp_cells, "bytes_sent": p.bytes_sent}) + "\n"
            for p in self.phases
        )


@dataclass
class WorkerStats:
    rank: int
    bucket_size: int
    phases: list[PhaseRecord]


class _Clock:
    def __init__(self, comm, counter):
        self.comm = comm
        self.counter = counter
        self.records: dict[str, PhaseRecord] = {}

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        c0 = self.counter.dp_cells
        b0 = self.comm.bytes_sent if self.comm is not None else 0
        try:
            yield
        finally:
            rec = self.records.setdefault(name, PhaseRecord(name))
            rec.wall_ms += (time.perf_counter() - t0) * 1000.0
            rec.dp_cells += self.counter.dp_cells - c0
            if self.comm is not None:
                rec.bytes_sent += self.comm.bytes_sent - b0

    def ordered(self):
        return [self.records[n] for n in PHASES if n in self.records]


# ---------------------------------------------------------------------------
# control payloads


def encode_config(cfg: PipelineConfig) -> bytes:
    def text(s):
        raw = (s or "").encode("utf-8")
        return struct.pack("<I", len(raw)) + raw

    return (
        text(cfg.alphabet)
        + struct.pack("<IIII", cfg.kmer_len or 0, cfg.worker_count, cfg.sample_count or 0, cfg.gap_penalty)
        + text(cfg.matrix)
        + text(cfg.external_aligner)
        + struct.pack("<Q", cfg.seed & 0xFFFFFFFFFFFFFFFF)
    )


def decode_config(body: bytes) -> PipelineConfig:
    r = wire._Reader(body)
    alphabet = r.text()
    kmer_len, workers, samples, gap = struct.unpack("<IIII", r.take(16))
    matrix = r.text() or None
    external = r.text() or None
    seed = r.u64()
    r.done()
    return PipelineConfig(
        alphabet=alphabet,
        kmer_len=kmer_len or None,
        worker_count=workers,
        sample_count=samples or None,
        matrix=matrix,
        gap_penalty=gap,
        external_aligner=external,
        seed=seed,
    )


def _encode_stats(s: WorkerStats) -> bytes:
    parts = [struct.pack("<III", s.rank, s.bucket_size, len(s.phases))]
    for p in s.phases:
        name = p.name.encode()
        parts.append(struct.pack("<I", len(name)) + name + struct.pack("<dQQ", p.wall_ms, p.dp_cells, p.bytes_sent))
    return b"".join(parts)


def _decode_stats(body: bytes) -> WorkerStats:
    r = wire._Reader(body)
    rank, bucket, count = struct.unpack("<III", r.take(12))
    phases = []
    for _ in range(count):
        name = r.text()
        wall, cells, sent = struct.unpack("<dQQ", r.take(24))
        phases.append(PhaseRecord(name, wall, cells, sent))
    r.done()
    return WorkerStats(rank, bucket, phases)


def collect_metrics(stats, n: int) -> RunMetrics:
    """Aggregate per-worker stats: counters summed, wall time max per phase."""
    stats = sorted(stats, key=lambda s: s.rank)
    merged: dict[str, PhaseRecord] = {}
    for s in stats:
        for p in s.phases:
            rec = merged.setdefault(p.name, PhaseRecord(p.name))
            rec.wall_ms = max(rec.wall_ms, p.wall_ms)
            rec.dp_cells += p.dp_cells
            rec.bytes_sent += p.bytes_sent
    phases = [merged[name] for name in PHASES if name in merged]
    return RunMetrics(
        n=n,
        worker_count=len(stats),
        dp_cells=sum(p.dp_cells for p in phases),
        bytes_sent=sum(p.bytes_sent for p in phases),
        bucket_sizes=[s.bucket_size for s in stats],
        phases=phases,
    )


# ---------------------------------------------------------------------------


def shard(sequences, p: int) -> list[list[Sequence]]:
    """Contiguous blocks by source_index; the first N mod p blocks get one extra."""
    seqs = sorted(sequences, key=lambda s: s.source_index)
    base, extra = divmod(len(seqs), p)
    blocks, start = [], 0
    for i in range(p):
        size = base + (1 if i < extra else 0)
        blocks.append(seqs[start : start + size])
        start += size
    return blocks


def validate(config: PipelineConfig, n: int) -> PipelineConfig:
    """Check the input size against p and pin the sample count."""
    p = config.worker_count
    if n < 1:
        raise InsufficientSequencesError("no sequences to align")
    if p == 1:
        return config
    w = n // p
    samples = config.partition_config.resolve_sample_count(w)
    need = max(2, samples, p - 1)
    if w < need:
        raise InsufficientSequencesError(
            f"{n} sequences over {p} workers leaves {w} per worker, need at least {need}; use fewer workers"
        )
    return replace(config, sample_count=samples)


def _align_bucket(seqs, config, matrix, counter):
    if config.external_aligner:
        return run_external_aligner(config.external_aligner, seqs, matrix.alphabet)
    return progressive_align(seqs, config.kmer_config, matrix, counter)


def _ancestor(local: Alignment, alphabet, rank: int) -> Sequence:
    name = f"ancestor{rank}"
    try:
        return consensus(local, alphabet, name, rank)
    except AllGapConsensusError:
        longest = max(local.rows, key=lambda r: (len(r.ungapped()), -r.source_index))
        return Sequence(name, longest.ungapped(), rank)


def sample_align_d(comm, config: PipelineConfig | None = None, sequences=None):
    """Run one worker.  Returns ``(Alignment, RunMetrics)`` at the root and
    ``None`` elsewhere.  ``config`` and ``sequences`` are read on the root only.
    """
    root = comm.is_root
    p = comm.size
    if root:
        sequences = list(sequences)
        config = validate(replace(config, worker_count=p), len(sequences))
    counter = WorkCounter()
    clock = _Clock(comm, counter)

    config = decode_config(comm.broadcast_from_root(MsgType.CONTROL, encode_config(config) if root else None))
    blocks = [wire.encode_sequences(b) for b in shard(sequences, p)] if root else None
    local = wire.decode_sequences(comm.scatter_from_root(MsgType.SEQUENCE_BATCH, blocks))
    n = len(sequences) if root else 0
    kcfg = config.kmer_config
    matrix = config.substitution_matrix()
    alphabet = matrix.alphabet

    if p == 1:
        with clock.phase("local_align"):
            aligned = _align_bucket(local, config, matrix, counter)
        return aligned, collect_metrics([WorkerStats(0, len(local), clock.ordered())], n)

    with clock.phase("local_rank"):
        ranked = sort_ranked(rank_all_centralized(local, kcfg))
    with clock.phase("sample_exchange"):
        picks = select_local_samples(ranked, config.sample_count)
        gathered = comm.all_gather(MsgType.SEQUENCE_BATCH, wire.encode_sequences(r.sequence for r in picks))
        samples = [s for body in gathered for s in wire.decode_sequences(body)]
        samples.sort(key=lambda s: s.source_index)
    with clock.phase("global_rank"):
        ranked = sort_ranked(rank_all_vs_samples(local, samples, kcfg))
    with clock.phase("pivots"):
        regular = select_local_samples(ranked, p - 1)
        ranks = comm.gather_at_root(MsgType.RANK_VECTOR, wire.encode_ranks(r.rank for r in regular))
        pivot_body = None
        if root:
            pivots = select_pivots([x for body in ranks for x in wire.decode_ranks(body)], p)
            pivot_body = wire.encode_ranks(pivots.pivots)
        pivots = PivotSet(wire.decode_ranks(comm.broadcast_from_root(MsgType.RANK_VECTOR, pivot_body)))
    with clock.phase("redistribute"):
        buckets = partition_set(ranked, pivots).buckets
        inboxes = comm.all_to_all(MsgType.SEQUENCE_BATCH, [wire.encode_sequences(r.sequence for r in b) for b in buckets])
        bucket = [s for body in inboxes for s in wire.decode_sequences(body)]
    with clock.phase("local_align"):
        aligned = _align_bucket(bucket, config, matrix, counter)
    with clock.phase("ancestors"):
        mine = [_ancestor(aligned, alphabet, comm.rank)] if aligned.rows else []
        ancestors = comm.gather_at_root(MsgType.SEQUENCE_BATCH, wire.encode_sequences(mine))
    with clock.phase("global_ancestor"):
        ga_body = None
        if root:
            pool = [s for body in ancestors for s in wire.decode_sequences(body)]
            ga_alignment = progressive_align(pool, kcfg, matrix, counter)
            ga_body = wire.encode_profile(profile_from_alignment(ga_alignment, alphabet))
        ga = wire.decode_profile(comm.broadcast_from_root(MsgType.PROFILE_BLOCK, ga_body), alphabet)
    with clock.phase("realign"):
        if aligned.rows:
            tweak = realign_to_template(aligned, ga, matrix, comm.rank, counter)
        else:
            tweak = TweakedAlignment(comm.rank, ga.width, Alignment(), [0] * (ga.width + 1))
    with clock.phase("glue"):
        parts = comm.gather_at_root(MsgType.TWEAK_BLOCK, wire.encode_tweak(tweak))
        final = merge_tweaked([wire.decode_tweak(b) for b in parts], ga.width) if root else None

    stats = comm.gather_at_root(MsgType.CONTROL, _encode_stats(WorkerStats(comm.rank, len(bucket), clock.ordered())))
    if not root:
        return None
    return final, collect_metrics([_decode_stats(b) for b in stats], n)


def globalized_ranks(sequences, p: int, sample_count, kmer_config: KmerConfig):
    """Sequential replay of the sharded ranking (local rank, sample, re-rank).

    ``sample_count="all"`` makes every block contribute all its sequences,
    which reproduces the centralized ranks exactly.  Output follows input
    order.
    """
    seqs = list(sequences)
    blocks = [b for b in shard(seqs, p) if b]
    samples = []
    for block in blocks:
        if sample_count == "all":
            samples.extend(block)
            continue
        count = PartitionConfig(p, sample_count).resolve_sample_count(len(block))
        ranked = sort_ranked(rank_all_centralized(block, kmer_config))
        samples.extend(r.sequence for r in select_local_samples(ranked, count))
    samples.sort(key=lambda s: s.source_index)
    return rank_all_vs_samples(seqs, samples, kmer_config)


def run_sample_align_d(config: PipelineConfig, sequences):
    """Run the pipeline with the in-process backend; returns ``(Alignment, RunMetrics)``."""
    sequences = list(sequences)
    config = validate(config, len(sequences))
    p = config.worker_count
    results = run_local(p, lambda comm: sample_align_d(comm, config if comm.is_root else None, sequences if comm.is_root else None))
    return results[0]


def run_tcp_root(config: PipelineConfig, sequences, host: str = "127.0.0.1", port: int = 0, announce=None, timeout: float = 120.0):
    """Bind, report the bound port through ``announce``, wait for workers, run."""
    sequences = list(sequences)
    config = validate(config, len(sequences))
    if config.worker_count == 1:
        return run_sample_align_d(config, sequences)
    server = TcpCommunicator.listen(host, port)
    if announce is not None:
        announce(server.getsockname())
    comm = TcpCommunicator.root(server, config.worker_count, timeout)
    try:
        return sample_align_d(comm, config, sequences)
    finally:
        comm.close()


def run_tcp_worker(host: str, port: int, timeout: float = 120.0):
    comm = TcpCommunicator.connect(host, port, timeout)
    try:
        return sample_align_d(comm)
    finally:
        comm.close()
