import subprocess
import sys
import threading
from functools import lru_cache
from pathlib import Path

import pytest

from samplealign.seqcore import DNA, PROTEIN, GenConfig, blosum62, dna_matrix, generate_family
from samplealign.transport import TcpCommunicator

DATA = Path(__file__).parent / "data"

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def dna():
    return dna_matrix()


@pytest.fixture(scope="session")
def blosum():
    return blosum62()


@lru_cache(maxsize=None)
def family(depth, length=120, seed=0, rates=(0.05, 0.01, 0.01), alphabet="protein"):
    alpha = PROTEIN if alphabet == "protein" else DNA
    return generate_family(GenConfig(alpha, depth, length, *rates, seed=seed))


def run_tcp(size, target):
    """Run ``target(comm)`` on ``size`` threads talking over real localhost sockets."""
    server = TcpCommunicator.listen("127.0.0.1", 0)
    port = server.getsockname()[1]
    results = {}
    errors = []

    def worker():
        try:
            comm = TcpCommunicator.connect("127.0.0.1", port, timeout=30)
            try:
                results[comm.rank] = target(comm)
            finally:
                comm.close()
        except BaseException as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(size - 1)]
    for t in threads:
        t.start()
    comm = TcpCommunicator.root(server, size, timeout=30)
    try:
        results[0] = target(comm)
    finally:
        comm.close()
    for t in threads:
        t.join(timeout=60)
    if errors:
        raise errors[0]
    return [results[r] for r in range(size)]


CLI = [sys.executable, "-m", "samplealign"]


def cli(*args, **kw):
    return subprocess.run([*CLI, *map(str, args)], capture_output=True, text=True, timeout=300, **kw)


def cli_tcp_align(input_path, output_path, workers, *extra):
    """Launch one root and ``workers - 1`` worker processes over localhost."""
    root = subprocess.Popen(
        [*CLI, "align", "--backend", "tcp", "--role", "root", "--workers", str(workers),
         "--input", str(input_path), "--output", str(output_path), "--connect", "127.0.0.1:0", *map(str, extra)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    line = root.stdout.readline().strip()
    assert line.startswith("listening "), line + root.stderr.read()
    addr = line.split()[1]
    procs = [
        subprocess.Popen([*CLI, "align", "--backend", "tcp", "--role", "worker", "--connect", addr],
                         stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        for _ in range(workers - 1)
    ]
    codes = [p.wait(timeout=300) for p in procs]
    root.wait(timeout=300)
    return root.returncode, codes


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
