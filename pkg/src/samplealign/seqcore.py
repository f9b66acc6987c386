"""Sequences, alignments, alphabets, substitution scoring, FASTA I/O and a
synthetic homologous-family generator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence as SeqType

import numpy as np

from .errors import (
    DuplicateIdError,
    EmptyInputError,
    IllegalSymbolError,
    InvalidRatesError,
    RaggedAlignmentError,
    UnknownSymbolError,
)

GAP = "-"


@dataclass(frozen=True)
class Alphabet:
    kind: str
    symbols: str
    # symbols that score 0 against everything
    unknown: str

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        if GAP in self.symbols or self.symbols != self.symbols.upper():
            raise ValueError("alphabet symbols must be uppercase and exclude the gap")

    @property
    def extended(self) -> str:
        """Symbols followed by the gap character; profile column order."""
        return self.symbols + GAP

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.extended)}


PROTEIN = Alphabet("Protein", "ACDEFGHIKLMNPQRSTVWYX", "X")
DNA = Alphabet("Dna", "ACGTN", "N")

ALPHABETS = {"protein": PROTEIN, "dna": DNA}


@dataclass(frozen=True)
class Sequence:
    id: str
    residues: str
    source_index: int = 0

    def __len__(self):
        return len(self.residues)


@dataclass(frozen=True)
class AlignedRow:
    id: str
    text: str
    source_index: int = 0

    def ungapped(self) -> str:
        return self.text.replace(GAP, "")

    def to_sequence(self) -> Sequence:
        return Sequence(self.id, self.ungapped(), self.source_index)


@dataclass(frozen=True)
class Alignment:
    rows: tuple[AlignedRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.rows:
            w = len(self.rows[0].text)
            for row in self.rows:
                if len(row.text) != w:
                    raise RaggedAlignmentError(
                        f"row {row.id!r} has length {len(row.text)}, expected {w}"
                    )

    @property
    def width(self) -> int:
        return len(self.rows[0].text) if self.rows else 0

    @property
    def depth(self) -> int:
        return len(self.rows)

    def __len__(self):
        return len(self.rows)

    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    def sequences(self) -> list[Sequence]:
        return [r.to_sequence() for r in self.rows]

    def sorted_by_source(self) -> Alignment:
        return Alignment(sorted(self.rows, key=lambda r: (r.source_index, r.id)))

    @classmethod
    def from_sequence(cls, seq: Sequence) -> Alignment:
        return cls((AlignedRow(seq.id, seq.residues, seq.source_index),))


# ---------------------------------------------------------------------------
# Substitution scoring

_BLOSUM62_ORDER = "ARNDCQEGHILKMFPSTWYV"
_BLOSUM62_ROWS = """
 4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0
-1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3
-2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3
-2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3
 0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1
-1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2
-1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2
 0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3
-2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3
-1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3
-1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1
-1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2
-1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1
-2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1
-1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2
 1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2
 0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0
-3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3
-2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1
 0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4
"""


class SubstitutionMatrix:
    """Symmetric integer scores over an alphabet plus a linear gap penalty.

    ``table`` is indexed in ``alphabet.extended`` order, so the last row and
    column hold the gap scores (``-gap_penalty`` against a symbol, 0 against
    another gap).
    """

    def __init__(self, alphabet: Alphabet, scores: dict[tuple[str, str], int], gap_penalty: int):
        if gap_penalty < 0:
            raise ValueError("gap_penalty must be nonnegative")
        self.alphabet = alphabet
        self.gap_penalty = gap_penalty
        n = alphabet.size
        table = np.zeros((n + 1, n + 1), dtype=np.int64)
        for i, a in enumerate(alphabet.symbols):
            for j, b in enumerate(alphabet.symbols):
                if (a, b) in scores:
                    v = scores[(a, b)]
                elif (b, a) in scores:
                    v = scores[(b, a)]
                else:
                    raise ValueError(f"missing score for {a}/{b}")
                if (b, a) in scores and scores[(b, a)] != v:
                    raise ValueError(f"asymmetric score for {a}/{b}")
                table[i, j] = v
        table[:n, n] = -gap_penalty
        table[n, :n] = -gap_penalty
        table.flags.writeable = False
        self.table = table
        self._index = alphabet.index()

    def score(self, a: str, b: str) -> int:
        try:
            return int(self.table[self._index[a], self._index[b]])
        except KeyError:
            bad = a if a not in self._index else b
            raise UnknownSymbolError(f"symbol {bad!r} not in {self.alphabet.kind} alphabet") from None

    def __eq__(self, other):
        return (
            isinstance(other, SubstitutionMatrix)
            and self.alphabet == other.alphabet
            and self.gap_penalty == other.gap_penalty
            and np.array_equal(self.table, other.table)
        )

    def __repr__(self):
        return f"SubstitutionMatrix({self.alphabet.kind}, gap_penalty={self.gap_penalty})"


def substitution_score(matrix: SubstitutionMatrix, a: str, b: str) -> int:
    return matrix.score(a, b)


def blosum62(gap_penalty: int = 6) -> SubstitutionMatrix:
    values = [int(v) for v in _BLOSUM62_ROWS.split()]
    n = len(_BLOSUM62_ORDER)
    scores = {}
    for i, a in enumerate(_BLOSUM62_ORDER):
        for j, b in enumerate(_BLOSUM62_ORDER):
            scores[(a, b)] = values[i * n + j]
    for s in PROTEIN.symbols:
        scores[("X", s)] = 0
    return SubstitutionMatrix(PROTEIN, scores, gap_penalty)


def dna_matrix(match: int = 5, mismatch: int = -4, gap_penalty: int = 6) -> SubstitutionMatrix:
    scores = {}
    for a in DNA.symbols:
        for b in DNA.symbols:
            if "N" in (a, b):
                scores[(a, b)] = 0
            else:
                scores[(a, b)] = match if a == b else mismatch
    return SubstitutionMatrix(DNA, scores, gap_penalty)


MATRICES = {"blosum62": blosum62, "dna": dna_matrix}


def default_matrix(alphabet: Alphabet) -> SubstitutionMatrix:
    return blosum62() if alphabet.kind == "Protein" else dna_matrix()


# ---------------------------------------------------------------------------
# FASTA


def _records(text: str):
    header = None
    chunks: list[str] = []
    for line in text.splitlines():
        line = line.rstrip("\r")
        if line.startswith(">"):
            if header is not None:
                yield header, "".join(chunks)
            header = line[1:].strip()
            chunks = []
        elif header is None:
            if line.strip():
                raise EmptyInputError("FASTA text must start with a '>' header")
        else:
            chunks.append("".join(line.split()))
    if header is not None:
        yield header, "".join(chunks)


def parse_fasta(data, alphabet: Alphabet, keep_gaps: bool = False):
    """Parse FASTA bytes (or text).

    Returns a list of :class:`Sequence` when ``keep_gaps`` is false (gap
    characters are stripped) and an :class:`Alignment` otherwise.
    ``source_index`` follows input order.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    allowed = set(alphabet.symbols)
    if keep_gaps:
        allowed.add(GAP)
    seen = set()
    out = []
    for index, (header, body) in enumerate(_records(text)):
        seq_id = header.split()[0] if header.split() else ""
        if not seq_id:
            raise EmptyInputError(f"record {index} has an empty id")
        if seq_id in seen:
            raise DuplicateIdError(seq_id)
        seen.add(seq_id)
        body = body.upper()
        if not keep_gaps:
            body = body.replace(GAP, "")
        for pos, ch in enumerate(body):
            if ch not in allowed:
                raise IllegalSymbolError(seq_id, pos, ch)
        if not body or (keep_gaps and not body.replace(GAP, "")):
            raise EmptyInputError(f"record {seq_id!r} has no residues")
        out.append((seq_id, body, index))
    if not out:
        raise EmptyInputError("no FASTA records found")
    if keep_gaps:
        return Alignment(AlignedRow(i, b, n) for i, b, n in out)
    return [Sequence(i, b, n) for i, b, n in out]


def write_fasta(items, wrap: int = 60) -> bytes:
    if wrap < 1:
        raise ValueError("wrap must be >= 1")
    rows = items.rows if isinstance(items, Alignment) else items
    lines = []
    for item in rows:
        body = item.text if isinstance(item, AlignedRow) else item.residues
        lines.append(">" + item.id)
        lines.extend(body[i : i + wrap] for i in range(0, len(body), wrap))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def read_fasta(path, alphabet: Alphabet, keep_gaps: bool = False):
    with open(path, "rb") as fh:
        return parse_fasta(fh.read(), alphabet, keep_gaps)


# ---------------------------------------------------------------------------
# Synthetic families


@dataclass(frozen=True)
class GenConfig:
    alphabet: Alphabet = PROTEIN
    tree_depth: int = 3
    root_length: int = 100
    sub_rate: float = 0.05
    ins_rate: float = 0.01
    del_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        rates = (self.sub_rate, self.ins_rate, self.del_rate)
        if any(r < 0 or r > 1 for r in rates) or sum(rates) > 1 + 1e-12:
            raise InvalidRatesError(f"rates {rates} must be probabilities summing to <= 1")
        if self.tree_depth < 1 or self.root_length < 1:
            raise ValueError("tree_depth and root_length must be >= 1")


class _ColumnOrder:
    """Master order of true-alignment columns; every lineage is a subsequence."""

    def __init__(self, n):
        self.order = list(range(n))
        self.next_id = n

    def insert_after(self, col):
        new = self.next_id
        self.next_id += 1
        self.order.insert(self.order.index(col) + 1, new)
        return new


def _evolve(residues, cols, cfg, rng, order, symbols):
    out_res, out_cols = [], []
    n = len(residues)
    draws = rng.random(n)
    for site in range(n):
        u = draws[site]
        res, col = residues[site], cols[site]
        if u < cfg.sub_rate:
            choices = [s for s in symbols if s != res]
            out_res.append(choices[rng.integers(len(choices))])
            out_cols.append(col)
        elif u < cfg.sub_rate + cfg.ins_rate:
            out_res.append(res)
            out_cols.append(col)
            out_res.append(symbols[rng.integers(len(symbols))])
            out_cols.append(order.insert_after(col))
        elif u < cfg.sub_rate + cfg.ins_rate + cfg.del_rate:
            # a lineage never loses its last residue
            if out_res or site < n - 1:
                continue
            out_res.append(res)
            out_cols.append(col)
        else:
            out_res.append(res)
            out_cols.append(col)
    return out_res, out_cols


def generate_family(config: GenConfig):
    """Evolve ``2**tree_depth`` leaves from a random root along a balanced
    binary tree.

    Returns ``(leaves, true_alignment)``.  Leaves are named ``seq0000`` ...
    in left-to-right tree order, which is also their ``source_index``.
    """
    rng = np.random.default_rng(config.seed)
    symbols = [s for s in config.alphabet.symbols if s != config.alphabet.unknown]
    root = [symbols[i] for i in rng.integers(len(symbols), size=config.root_length)]
    order = _ColumnOrder(config.root_length)
    level = [(root, list(range(config.root_length)))]
    for _ in range(config.tree_depth):
        nxt = []
        for residues, cols in level:
            nxt.append(_evolve(residues, cols, config, rng, order, symbols))
            nxt.append(_evolve(residues, cols, config, rng, order, symbols))
        level = nxt

    used = set()
    for _, cols in level:
        used.update(cols)
    columns = [c for c in order.order if c in used]
    position = {c: i for i, c in enumerate(columns)}
    width = len(columns)
    leaves, rows = [], []
    pad = max(4, len(str(len(level) - 1)))
    for idx, (residues, cols) in enumerate(level):
        name = f"seq{idx:0{pad}d}"
        text = [GAP] * width
        for r, c in zip(residues, cols):
            text[position[c]] = r
        leaves.append(Sequence(name, "".join(residues), idx))
        rows.append(AlignedRow(name, "".join(text), idx))
    return leaves, Alignment(rows)


def check_degap(alignment: Alignment, sequences: Iterable[Sequence]) -> bool:
    """True when every row de-gaps to the residues of the sequence with its id."""
    by_id = {s.id: s.residues for s in sequences}
    if len(by_id) != len(alignment.rows):
        return False
    return all(by_id.get(r.id) == r.ungapped() for r in alignment.rows)
