from .barrier import Barrier, barrier
from .ghosts import DataPush, apply_push, push_modified, replica_mismatches
from .termination import TermToken, TerminationDetector, detect_termination, ring_settled
from .transport import (
    BASIC_KINDS,
    FLUSH_KINDS,
    Envelope,
    InProcTransport,
    Kind,
    SocketEndpoint,
    decode_frames,
    encode_frame,
)

__all__ = [
    "Barrier", "barrier", "DataPush", "apply_push", "push_modified", "replica_mismatches",
    "TermToken", "TerminationDetector", "detect_termination", "ring_settled",
    "BASIC_KINDS", "FLUSH_KINDS", "Envelope", "InProcTransport", "Kind", "SocketEndpoint",
    "decode_frames", "encode_frame",
]
