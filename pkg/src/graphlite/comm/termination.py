"""Token-ring distributed termination detection with message counting.

Machine 0 launches a token that visits every machine in id order. A machine
forwards the token only while passive and stamps it with its cumulative
sent/received counts of work messages and whether it stayed passive since
the previous visit. Termination is declared when two consecutive rings are
clean, balanced (sent == received) and report identical counts.
"""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class TermToken:
    round: int
    sent: int = 0
    received: int = 0
    all_idle: bool = True
    terminate: bool = False


def ring_settled(prev: TermToken | None, cur: TermToken) -> bool:
    if prev is None:
        return False
    return (prev.all_idle and cur.all_idle
            and prev.sent == prev.received
            and cur.sent == cur.received
            and prev.sent == cur.sent and prev.received == cur.received)


class TerminationDetector:
    """Per-machine token state; pure bookkeeping, no I/O."""

    def __init__(self, me, m):
        self.me = me
        self.m = m
        self.dirty = False
        self.prev = None
        self.rounds = 0
        self.held = None
        self.outstanding = False
        self._opening = None

    def mark_dirty(self):
        self.dirty = True

    @property
    def next_hop(self):
        return (self.me + 1) % self.m

    def stamp(self, token: TermToken, sent: int, received: int) -> TermToken:
        tok = replace(token, sent=token.sent + sent, received=token.received + received,
                      all_idle=token.all_idle and not self.dirty)
        self.dirty = False
        return tok

    def open_ring(self, sent, received) -> TermToken:
        """Machine 0 starts a ring; its own counts are stamped up front."""
        self.rounds += 1
        self.outstanding = True
        self._opening = (sent, received)
        return self.stamp(TermToken(self.rounds), sent, received)

    def close_ring(self, token: TermToken, sent, received) -> bool:
        """Machine 0 receives its token back; True means terminate."""
        self.outstanding = False
        clean = not self.dirty and (sent, received) == self._opening
        self.dirty = False
        cur = replace(token, all_idle=token.all_idle and clean)
        done = ring_settled(self.prev, cur)
        self.prev = cur
        return done


def detect_termination(local_idle, counts, detector: TerminationDetector | None = None,
                       token: TermToken | None = None) -> bool:
    """Single-machine shortcut and ring evaluation helper.

    With one machine the answer is simply whether it is idle with balanced
    counts; on a ring, ``token`` is the token returning to machine 0.
    """
    sent, received = counts
    idle = local_idle() if callable(local_idle) else bool(local_idle)
    if detector is None or detector.m == 1:
        return idle and sent == received
    if token is None:
        return False
    return idle and detector.close_ring(token, sent, received)
