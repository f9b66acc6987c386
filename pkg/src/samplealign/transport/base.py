"""Collectives over point-to-point frames.

Backends only supply ``_post`` (deliver a frame to a peer) and ``_inbox``
(the queue of frames from a peer).  Every backend hands each worker one
inbound queue per peer, so results are ordered by sender index no matter
when frames arrive.
"""

from __future__ import annotations

import queue

from ..errors import FrameCorruptError, PeerDisconnectedError
from .wire import MsgType, decode_frame, encode_frame

ROOT = 0
DISCONNECTED = object()


class Communicator:
    timeout: float | None = 3600.0

    def __init__(self, rank: int, size: int):
        if not 0 <= rank < size:
            raise ValueError(f"rank {rank} outside [0, {size})")
        self.rank = rank
        self.size = size
        self.bytes_sent = 0
        self._seq = 0

    @property
    def is_root(self) -> bool:
        return self.rank == ROOT

    # backend hooks
    def _post(self, dest: int, frame: bytes):
        raise NotImplementedError

    def _inbox(self, src: int) -> queue.Queue:
        raise NotImplementedError

    def close(self):
        pass

    # point-to-point
    def _send(self, dest: int, msg_type: MsgType, body: bytes):
        frame = encode_frame(msg_type, self._seq, body)
        self.bytes_sent += len(frame)
        self._post(dest, frame)

    def _recv(self, src: int, msg_type: MsgType) -> bytes:
        try:
            frame = self._inbox(src).get(timeout=self.timeout)
        except queue.Empty:
            raise PeerDisconnectedError(f"timed out waiting for worker {src}") from None
        if frame is DISCONNECTED:
            raise PeerDisconnectedError(f"worker {src} disconnected")
        got_type, seq, body = decode_frame(frame)
        if got_type != msg_type or seq != self._seq:
            raise FrameCorruptError(
                f"worker {self.rank} expected {MsgType(msg_type).name}#{self._seq} "
                f"from {src}, got {MsgType(got_type).name}#{seq}"
            )
        return body

    def _next(self):
        self._seq += 1

    # collectives
    def gather_at_root(self, msg_type: MsgType, payload: bytes):
        """Root gets payloads indexed by worker; everyone else gets None."""
        self._next()
        if not self.is_root:
            self._send(ROOT, msg_type, payload)
            return None
        return [payload if src == ROOT else self._recv(src, msg_type) for src in range(self.size)]

    def broadcast_from_root(self, msg_type: MsgType, payload: bytes | None = None) -> bytes:
        self._next()
        if self.is_root:
            for dest in range(1, self.size):
                self._send(dest, msg_type, payload)
            return payload
        return self._recv(ROOT, msg_type)

    def scatter_from_root(self, msg_type: MsgType, payloads=None) -> bytes:
        """Worker i receives ``payloads[i]`` from the root."""
        self._next()
        if self.is_root:
            payloads = list(payloads)
            for dest in range(1, self.size):
                self._send(dest, msg_type, payloads[dest])
            return payloads[ROOT]
        return self._recv(ROOT, msg_type)

    def all_gather(self, msg_type: MsgType, payload: bytes) -> list[bytes]:
        self._next()
        for dest in range(self.size):
            if dest != self.rank:
                self._send(dest, msg_type, payload)
        return [payload if src == self.rank else self._recv(src, msg_type) for src in range(self.size)]

    def all_to_all(self, msg_type: MsgType, outboxes) -> list[bytes]:
        """Slot j of the result holds what worker j addressed to this worker."""
        outboxes = list(outboxes)
        if len(outboxes) != self.size:
            raise ValueError(f"need {self.size} outboxes, got {len(outboxes)}")
        self._next()
        for dest in range(self.size):
            if dest != self.rank:
                self._send(dest, msg_type, outboxes[dest])
        return [outboxes[src] if src == self.rank else self._recv(src, msg_type) for src in range(self.size)]


def gather_at_root(comm: Communicator, payload: bytes, msg_type=MsgType.CONTROL):
    return comm.gather_at_root(msg_type, payload)


def broadcast_from_root(comm: Communicator, payload: bytes | None, msg_type=MsgType.CONTROL) -> bytes:
    return comm.broadcast_from_root(msg_type, payload)


def all_gather(comm: Communicator, payload: bytes, msg_type=MsgType.CONTROL) -> list[bytes]:
    return comm.all_gather(msg_type, payload)


def all_to_all(comm: Communicator, outboxes, msg_type=MsgType.CONTROL) -> list[bytes]:
    return comm.all_to_all(msg_type, outboxes)
