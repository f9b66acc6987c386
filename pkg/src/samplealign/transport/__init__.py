from .base import (
    ROOT,
    Communicator,
    all_gather,
    all_to_all,
    broadcast_from_root,
    gather_at_root,
)
from .local import LocalCommunicator, LocalFabric, run_local
from .tcp import TcpCommunicator, parse_address
from .wire import MsgType

__all__ = [
    "ROOT",
    "Communicator",
    "LocalCommunicator",
    "LocalFabric",
    "MsgType",
    "TcpCommunicator",
    "all_gather",
    "all_to_all",
    "broadcast_from_root",
    "gather_at_root",
    "parse_address",
    "run_local",
]
