"""In-process backend: p worker threads exchanging immutable byte frames."""

from __future__ import annotations

import queue
import threading

from ..errors import PeerDisconnectedError
from .base import DISCONNECTED, Communicator


class LocalFabric:
    def __init__(self, size: int):
        self.size = size
        # queues[dest][src]
        self.queues = [[queue.Queue() for _ in range(size)] for _ in range(size)]

    def communicator(self, rank: int) -> LocalCommunicator:
        return LocalCommunicator(self, rank)

    def abort(self):
        for row in self.queues:
            for q in row:
                q.put(DISCONNECTED)


class LocalCommunicator(Communicator):
    def __init__(self, fabric: LocalFabric, rank: int):
        super().__init__(rank, fabric.size)
        self.fabric = fabric

    def _post(self, dest, frame):
        self.fabric.queues[dest][self.rank].put(frame)

    def _inbox(self, src):
        return self.fabric.queues[self.rank][src]


def run_local(size: int, target, *args):
    """Run ``target(comm, *args)`` on ``size`` threads; return per-rank results.

    If any worker fails, the rest are unblocked with PeerDisconnected and the
    first non-transport failure is re-raised.
    """
    fabric = LocalFabric(size)
    results = [None] * size
    errors: list[tuple[int, BaseException]] = []
    lock = threading.Lock()

    def body(rank):
        try:
            results[rank] = target(fabric.communicator(rank), *args)
        except BaseException as exc:  # noqa: BLE001 - re-raised below
            with lock:
                errors.append((rank, exc))
            fabric.abort()

    if size == 1:
        body(0)
    else:
        threads = [threading.Thread(target=body, args=(r,), name=f"worker-{r}") for r in range(size)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors:
        primary = [e for _, e in errors if not isinstance(e, PeerDisconnectedError)]
        raise (primary or [errors[0][1]])[0]
    return results
