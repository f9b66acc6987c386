"""TCP backend: one OS process per worker, full mesh of sockets.

Rendezvous: every worker opens its own listener, connects to the root and
sends ``hello(nonce:u64, listen_port:u32)``.  The root orders workers by
nonce, assigns ids ``1..p-1`` and replies ``welcome(id, p, peer table)``.
Worker ``i`` then dials every worker ``1 <= j < i`` and accepts the rest.
Rendezvous frames are CONTROL frames with sequence number 0.
"""

from __future__ import annotations

import logging
import os
import queue
import socket
import struct
import threading
import time

from ..errors import FrameCorruptError, PeerDisconnectedError
from .base import DISCONNECTED, ROOT, Communicator
from .wire import HEADER, MsgType, decode_frame, encode_frame, parse_header

log = logging.getLogger(__name__)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise PeerDisconnectedError("connection closed")
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock: socket.socket) -> bytes:
    header = _recv_exact(sock, HEADER.size)
    _, length = parse_header(header)
    return header + _recv_exact(sock, length)


def _control(sock: socket.socket, body: bytes):
    sock.sendall(encode_frame(MsgType.CONTROL, 0, body))


def _expect_control(sock: socket.socket) -> bytes:
    msg_type, seq, body = decode_frame(read_frame(sock))
    if msg_type != MsgType.CONTROL or seq != 0:
        raise FrameCorruptError("unexpected frame during rendezvous")
    return body


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class TcpCommunicator(Communicator):
    def __init__(self, rank: int, size: int, peers: dict[int, socket.socket]):
        super().__init__(rank, size)
        self.peers = peers
        self.inboxes = {src: queue.Queue() for src in range(size)}
        self._readers = []
        for src, sock in peers.items():
            sock.settimeout(None)
            t = threading.Thread(target=self._pump, args=(src, sock), daemon=True, name=f"tcp-reader-{src}")
            t.start()
            self._readers.append(t)

    def _pump(self, src, sock):
        try:
            while True:
                self.inboxes[src].put(read_frame(sock))
        except FrameCorruptError as exc:
            log.error("corrupt frame from worker %d: %s", src, exc)
        except (OSError, PeerDisconnectedError):
            pass
        self.inboxes[src].put(DISCONNECTED)

    def _post(self, dest, frame):
        try:
            self.peers[dest].sendall(frame)
        except OSError as exc:
            raise PeerDisconnectedError(f"send to worker {dest} failed: {exc}") from exc

    def _inbox(self, src):
        return self.inboxes[src]

    def close(self):
        for sock in self.peers.values():
            try:
                sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass
        for t in self._readers:
            t.join(timeout=5)
        for sock in self.peers.values():
            sock.close()

    # ------------------------------------------------------------------
    @classmethod
    def listen(cls, host: str, port: int) -> socket.socket:
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(128)
        return server

    @classmethod
    def root(cls, server: socket.socket, size: int, timeout: float = 120.0) -> TcpCommunicator:
        """Accept ``size - 1`` workers on an already-bound listener."""
        server.settimeout(timeout)
        arrivals = []
        try:
            while len(arrivals) < size - 1:
                sock, addr = server.accept()
                sock.settimeout(timeout)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                nonce, listen_port = struct.unpack("<QI", _expect_control(sock))
                arrivals.append((nonce, len(arrivals), sock, addr[0], listen_port))
        except socket.timeout:
            raise PeerDisconnectedError(f"only {len(arrivals)} of {size - 1} workers connected") from None
        finally:
            server.close()
        arrivals.sort(key=lambda a: (a[0], a[1]))
        table = b"".join(
            struct.pack("<I", len(host.encode())) + host.encode() + struct.pack("<I", port)
            for _, _, _, host, port in arrivals
        )
        peers = {}
        for worker_id, (_, _, sock, _, _) in enumerate(arrivals, start=1):
            _control(sock, struct.pack("<II", worker_id, size) + table)
            peers[worker_id] = sock
        return cls(ROOT, size, peers)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 120.0) -> TcpCommunicator:
        deadline = time.monotonic() + timeout
        while True:
            try:
                root = socket.create_connection((host, port), timeout=timeout)
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise PeerDisconnectedError(f"cannot reach root at {host}:{port}") from None
                time.sleep(0.05)
        root.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        server = cls.listen(root.getsockname()[0], 0)
        server.settimeout(timeout)
        nonce = int.from_bytes(os.urandom(8), "little")
        _control(root, struct.pack("<QI", nonce, server.getsockname()[1]))
        welcome = _expect_control(root)
        rank, size = struct.unpack_from("<II", welcome)
        pos, table = 8, {}
        for worker_id in range(1, size):
            (n,) = struct.unpack_from("<I", welcome, pos)
            peer_host = welcome[pos + 4 : pos + 4 + n].decode()
            (peer_port,) = struct.unpack_from("<I", welcome, pos + 4 + n)
            table[worker_id] = (peer_host, peer_port)
            pos += 8 + n

        peers = {ROOT: root}
        try:
            for j in range(1, rank):
                sock = socket.create_connection(table[j], timeout=timeout)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                _control(sock, struct.pack("<I", rank))
                peers[j] = sock
            for _ in range(size - rank - 1):
                sock, _ = server.accept()
                sock.settimeout(timeout)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                (j,) = struct.unpack("<I", _expect_control(sock))
                peers[j] = sock
        except socket.timeout:
            raise PeerDisconnectedError("mesh setup timed out") from None
        finally:
            server.close()
        return cls(rank, size, peers)
