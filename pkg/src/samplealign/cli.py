"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import DataError, TransportError
from .kmer import KmerConfig, default_kmer_config, rank_all_centralized
from .msa import sp_score
from .pipeline import PipelineConfig, globalized_ranks, run_sample_align_d, run_tcp_root, run_tcp_worker
from .quality import q_score, rank_stats
from .seqcore import ALPHABETS, MATRICES, GenConfig, generate_family, read_fasta, write_fasta
from .transport import parse_address

log = logging.getLogger("samplealign")

EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _samples(text):
    if text == "all":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'all', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("sample count must be >= 1")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="samplealign", description="Distributed multiple sequence alignment by k-mer rank sampling.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("align", help="align a FASTA file")
    p.add_argument("--input", type=Path)
    p.add_argument("--output", type=Path)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--backend", choices=["local", "tcp"], default="local")
    p.add_argument("--role", choices=["root", "worker"], default="root")
    p.add_argument("--connect", default="127.0.0.1:0", help="tcp: root bind address / worker root address")
    p.add_argument("--kmer", type=_positive)
    p.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    p.add_argument("--samples", type=_positive)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--external-aligner")
    p.add_argument("--metrics", type=Path)
    p.add_argument("--timeout", type=float, default=120.0, help="tcp: seconds to wait for peers during setup")

    p = sub.add_parser("gen", help="generate a synthetic family and its true alignment")
    p.add_argument("--count-exponent", type=_positive, required=True)
    p.add_argument("--length", type=_positive, required=True)
    p.add_argument("--sub-rate", type=float, default=0.05)
    p.add_argument("--ins-rate", type=float, default=0.01)
    p.add_argument("--del-rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--true-alignment", type=Path, required=True)

    p = sub.add_parser("score", help="Q-score or sum-of-pairs score of an alignment")
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--ref", type=Path)
    p.add_argument("--metric", choices=["q", "sp"], default="q")
    p.add_argument("--matrix", choices=sorted(MATRICES))
    p.add_argument("--alphabet", choices=sorted(ALPHABETS))

    p = sub.add_parser("rank", help="print k-mer ranks")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--mode", choices=["central", "globalized"], default="central")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--samples", type=_samples)
    p.add_argument("--kmer", type=_positive)
    p.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    p.add_argument("--compare", action="store_true", help="print both modes and a statistics block")

    p = sub.add_parser("bench", help="work and load per worker count")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--workers-list", default="1,2,4,8")
    p.add_argument("--backend", choices=["local"], default="local")
    p.add_argument("--kmer", type=_positive)
    p.add_argument("--alphabet", choices=sorted(ALPHABETS), default="protein")
    p.add_argument("--samples", type=_positive)
    return parser


def _pipeline_config(args, workers=None) -> PipelineConfig:
    return PipelineConfig(
        alphabet=args.alphabet,
        kmer_len=args.kmer,
        worker_count=workers or args.workers,
        sample_count=args.samples,
        external_aligner=getattr(args, "external_aligner", None),
        backend=getattr(args, "backend", "local"),
        seed=getattr(args, "seed", 0),
    )


def cmd_align(args) -> int:
    if args.backend == "tcp" and args.role == "worker":
        host, port = parse_address(args.connect)
        run_tcp_worker(host, port, args.timeout)
        return 0
    if args.input is None or args.output is None:
        raise UsageError("align needs --input and --output")
    config = _pipeline_config(args)
    sequences = read_fasta(args.input, config.alphabet_obj)
    if args.backend == "tcp":
        host, port = parse_address(args.connect)

        def announce(addr):
            print(f"listening {addr[0]}:{addr[1]}", flush=True)

        alignment, metrics = run_tcp_root(config, sequences, host, port, announce, args.timeout)
    else:
        alignment, metrics = run_sample_align_d(config, sequences)
    args.output.write_bytes(write_fasta(alignment))
    sys.stderr.write(metrics.report())
    if args.metrics:
        args.metrics.write_text(metrics.to_jsonl())
    return 0


def cmd_gen(args) -> int:
    cfg = GenConfig(
        alphabet=ALPHABETS[args.alphabet],
        tree_depth=args.count_exponent,
        root_length=args.length,
        sub_rate=args.sub_rate,
        ins_rate=args.ins_rate,
        del_rate=args.del_rate,
        seed=args.seed,
    )
    leaves, true = generate_family(cfg)
    args.output.write_bytes(write_fasta(leaves))
    args.true_alignment.write_bytes(write_fasta(true))
    return 0


def cmd_score(args) -> int:
    if args.matrix is None:
        args.matrix = "dna" if args.alphabet == "dna" else "blosum62"
    matrix = MATRICES[args.matrix]()
    alphabet = ALPHABETS[args.alphabet] if args.alphabet else matrix.alphabet
    if alphabet != matrix.alphabet:
        raise UsageError(f"matrix {args.matrix} does not fit alphabet {args.alphabet}")
    test = read_fasta(args.test, alphabet, keep_gaps=True)
    if args.metric == "sp":
        print(f"sp={sp_score(test, matrix)}")
        return 0
    if args.ref is None:
        raise UsageError("--metric q needs --ref")
    ref = read_fasta(args.ref, alphabet, keep_gaps=True)
    print(f"q={q_score(test, ref):.6f}")
    return 0


def cmd_rank(args) -> int:
    alphabet = ALPHABETS[args.alphabet]
    kcfg = KmerConfig(args.kmer) if args.kmer else default_kmer_config(alphabet)
    seqs = read_fasta(args.input, alphabet)
    central = globalized = None
    if args.mode == "central" or args.compare:
        central = rank_all_centralized(seqs, kcfg)
    if args.mode == "globalized" or args.compare:
        globalized = globalized_ranks(seqs, args.workers, args.samples, kcfg)
    if args.compare:
        print("id\tcentral\tglobalized")
        for a, b in zip(central, globalized):
            print(f"{a.sequence.id}\t{a.rank:.6f}\t{b.rank:.6f}")
        sys.stdout.write(rank_stats([r.rank for r in central], [r.rank for r in globalized]).report())
        return 0
    print("id\trank")
    for r in central or globalized:
        print(f"{r.sequence.id}\t{r.rank:.6f}")
    return 0


def cmd_bench(args) -> int:
    try:
        workers = [int(w) for w in args.workers_list.split(",") if w.strip()]
    except ValueError:
        raise UsageError(f"bad --workers-list {args.workers_list!r}") from None
    if not workers or min(workers) < 1:
        raise UsageError("--workers-list needs positive integers")
    base = PipelineConfig(alphabet=args.alphabet)
    seqs = read_fasta(args.input, base.alphabet_obj)
    print("workers\twall_ms\tdp_cells\tmax_bucket\tbucket_total")
    for p in workers:
        config = _pipeline_config(args, workers=p)
        t0 = time.perf_counter()
        _, metrics = run_sample_align_d(config, seqs)
        wall = (time.perf_counter() - t0) * 1000.0
        print(f"{p}\t{wall:.1f}\t{metrics.dp_cells}\t{max(metrics.bucket_sizes)}\t{sum(metrics.bucket_sizes)}")
    return 0


COMMANDS = {"align": cmd_align, "gen": cmd_gen, "score": cmd_score, "rank": cmd_rank, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"samplealign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"samplealign: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DataError, OSError) as exc:
        print(f"samplealign: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"samplealign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
