"""Binary frame format and payload codecs.

Frame layout::

    b"SAD1" | msg_type:u8 | payload_len:u32le | payload

Every payload starts with a u32le collective sequence number; the rest is
one of the codecs below.  All integers are little-endian, all reals are
IEEE-754 doubles.
"""

from __future__ import annotations

import enum
import struct

import numpy as np

from ..errors import FrameCorruptError
from ..msa import Profile, TweakedAlignment
from ..seqcore import AlignedRow, Alignment, Alphabet, Sequence

MAGIC = b"SAD1"
HEADER = struct.Struct("<4sBI")
MAX_PAYLOAD = 2**31


class MsgType(enum.IntEnum):
    RANK_VECTOR = 1
    SEQUENCE_BATCH = 2
    PROFILE_BLOCK = 3
    ALIGNMENT_BATCH = 4
    TWEAK_BLOCK = 5
    CONTROL = 6


def encode_frame(msg_type: int, seq: int, body: bytes) -> bytes:
    payload = struct.pack("<I", seq) + body
    if len(payload) > MAX_PAYLOAD:
        raise FrameCorruptError("payload too large")
    return HEADER.pack(MAGIC, int(msg_type), len(payload)) + payload


def parse_header(header: bytes) -> tuple[int, int]:
    if len(header) != HEADER.size:
        raise FrameCorruptError("truncated frame header")
    magic, msg_type, length = HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameCorruptError(f"bad magic {magic!r}")
    if msg_type not in MsgType._value2member_map_:
        raise FrameCorruptError(f"unknown message type {msg_type}")
    if length > MAX_PAYLOAD or length < 4:
        raise FrameCorruptError(f"bad payload length {length}")
    return msg_type, length


def decode_frame(frame: bytes) -> tuple[int, int, bytes]:
    """Return ``(msg_type, seq, body)``."""
    msg_type, length = parse_header(frame[: HEADER.size])
    payload = frame[HEADER.size :]
    if len(payload) != length:
        raise FrameCorruptError(f"payload length {len(payload)} != header {length}")
    (seq,) = struct.unpack_from("<I", payload)
    return msg_type, seq, payload[4:]


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameCorruptError("payload truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameCorruptError("invalid utf-8 in payload") from exc

    def f64_array(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.data):
            raise FrameCorruptError(f"{len(self.data) - self.pos} trailing bytes in payload")


def _text(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


# RankVector


def encode_ranks(ranks) -> bytes:
    ranks = list(ranks)
    return struct.pack("<I", len(ranks)) + np.asarray(ranks, dtype="<f8").tobytes()


def decode_ranks(body: bytes) -> list[float]:
    r = _Reader(body)
    out = r.f64_array(r.u32()).tolist()
    r.done()
    return out


# SequenceBatch / AlignmentBatch


def _encode_records(records) -> bytes:
    parts = [struct.pack("<I", len(records))]
    for seq_id, text, index in records:
        parts.append(_text(seq_id))
        parts.append(_text(text))
        parts.append(struct.pack("<I", index))
    return b"".join(parts)


def _decode_records(r: _Reader):
    out = []
    for _ in range(r.u32()):
        seq_id = r.text()
        text = r.text()
        out.append((seq_id, text, r.u32()))
    return out


def encode_sequences(seqs) -> bytes:
    return _encode_records([(s.id, s.residues, s.source_index) for s in seqs])


def decode_sequences(body: bytes) -> list[Sequence]:
    r = _Reader(body)
    out = [Sequence(*rec) for rec in _decode_records(r)]
    r.done()
    return out


def encode_alignment(aln: Alignment) -> bytes:
    return _encode_records([(row.id, row.text, row.source_index) for row in aln.rows])


def _alignment_from(records) -> Alignment:
    try:
        return Alignment(AlignedRow(*rec) for rec in records)
    except Exception as exc:
        raise FrameCorruptError(f"invalid alignment payload: {exc}") from exc


def decode_alignment(body: bytes) -> Alignment:
    r = _Reader(body)
    aln = _alignment_from(_decode_records(r))
    r.done()
    return aln


# ProfileBlock: width, depth, symbol count, then width*nsym frequencies


def encode_profile(profile: Profile) -> bytes:
    head = struct.pack("<III", profile.width, profile.depth, profile.counts.shape[1])
    return head + np.ascontiguousarray(profile.columns, dtype="<f8").tobytes()


def decode_profile(body: bytes, alphabet: Alphabet) -> Profile:
    r = _Reader(body)
    width, depth = r.u32(), r.u32()
    nsym = r.u32()
    if nsym != len(alphabet.extended):
        raise FrameCorruptError(f"profile has {nsym} symbols, alphabet has {len(alphabet.extended)}")
    freqs = r.f64_array(width * nsym).reshape(width, nsym)
    r.done()
    # frequencies are count/depth, so rounding recovers the counts exactly
    counts = np.rint(freqs * depth).astype(np.int64)
    if depth and (counts.sum(axis=1) != depth).any():
        raise FrameCorruptError("profile column counts do not sum to depth")
    return Profile(counts, depth, alphabet)


# TweakBlock: worker id, template width, insert counts, alignment batch


def encode_tweak(t: TweakedAlignment) -> bytes:
    head = struct.pack("<II", t.worker_id, t.ga_width)
    counts = struct.pack(f"<{len(t.insert_counts)}I", *t.insert_counts)
    return head + counts + encode_alignment(t.rows)


def decode_tweak(body: bytes) -> TweakedAlignment:
    r = _Reader(body)
    worker_id, ga_width = r.u32(), r.u32()
    counts = [r.u32() for _ in range(ga_width + 1)]
    rows = _alignment_from(_decode_records(r))
    r.done()
    try:
        return TweakedAlignment(worker_id, ga_width, rows, counts)
    except Exception as exc:
        raise FrameCorruptError(f"invalid tweak block: {exc}") from exc
