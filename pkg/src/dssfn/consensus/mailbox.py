"""Per-link message queues for the event-driven simulator."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    sent_at: int  # sender-side activation counter
    ready_at: int  # first activation at which the receiver may see it
    payload: np.ndarray


class Mailbox:
    """FIFO queue per directed link ``(sender, receiver)``.

    A message sent during activation ``k`` with delay ``delay`` becomes
    visible at activation ``k + 1 + delay``. Ready times on one link never
    decrease, so a short delay cannot overtake an earlier long one; this keeps
    FIFO order without ever exceeding the delay bound of the later message.
    """

    def __init__(self, links):
        self._queues: dict[tuple[int, int], deque[Message]] = {link: deque() for link in links}
        self._last_ready: dict[tuple[int, int], int] = {link: 0 for link in links}
        self.sent = 0
        self.delivered = 0
        self.max_staleness = 0

    def send(self, sender: int, receiver: int, payload: np.ndarray, sent_at: int, delay: int = 0) -> Message:
        link = (sender, receiver)
        if link not in self._queues:
            raise KeyError(f"no link {sender} -> {receiver}")
        ready = max(sent_at + 1 + delay, self._last_ready[link])
        self._last_ready[link] = ready
        msg = Message(sender, receiver, sent_at, ready, payload)
        self._queues[link].append(msg)
        self.sent += 1
        return msg

    def deliver(self, now: int) -> list[Message]:
        """Pop every message whose ready time is ``<= now``, in per-link send order."""
        out = []
        for q in self._queues.values():
            while q and q[0].ready_at <= now:
                msg = q.popleft()
                self.max_staleness = max(self.max_staleness, now - (msg.sent_at + 1))
                out.append(msg)
        self.delivered += len(out)
        return out

    def flush(self) -> list[Message]:
        """Deliver everything still in flight, ignoring ready times."""
        out = []
        for q in self._queues.values():
            out.extend(q)
            q.clear()
        self.delivered += len(out)
        return out

    @property
    def in_flight(self) -> int:
        return sum(len(q) for q in self._queues.values())
