"""Simulated inter-robot channel with byte accounting."""

from __future__ import annotations

import csv
import io
from collections import defaultdict, deque
from dataclasses import dataclass, field


@dataclass(frozen=True)
class MessageLogEntry:
    time: int  # scheduler tick
    src: int
    dst: int
    size: int
    kind: str


@dataclass
class ChannelStats:
    sent: dict[int, int] = field(default_factory=lambda: defaultdict(int))
    received: dict[int, int] = field(default_factory=lambda: defaultdict(int))
    log: list[MessageLogEntry] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(e.size for e in self.log)

    def link_bytes(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = defaultdict(int)
        for e in self.log:
            out[(e.src, e.dst)] += e.size
        return dict(out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "src", "dst", "size", "type"])
        for e in self.log:
            w.writerow([e.time, e.src, e.dst, e.size, e.kind])
        return buf.getvalue()


class Channel:
    """Reliable FIFO per directed link; ``reorder`` delivers each batch newest-first."""

    def __init__(self, reorder: bool = False):
        self.links: dict[tuple[int, int], deque] = defaultdict(deque)
        self.stats = ChannelStats()
        self.reorder = reorder

    def send(self, time: int, src: int, dst: int, payload: bytes, kind: str) -> None:
        self.links[(src, dst)].append((time, payload, kind))
        self.stats.sent[src] += len(payload)

    def broadcast(self, time: int, src: int, robots, payload: bytes, kind: str) -> None:
        for dst in robots:
            if dst != src:
                self.send(time, src, dst, payload, kind)

    def deliver(self, dst: int) -> list[tuple[int, bytes]]:
        """Pop everything queued for ``dst``: [(src, payload)] in link order."""
        out = []
        for (src, d) in sorted(self.links):
            if d != dst:
                continue
            q = self.links[(src, d)]
            batch = list(q)
            q.clear()
            if self.reorder:
                batch.reverse()
            for time, payload, kind in batch:
                self.stats.received[dst] += len(payload)
                self.stats.log.append(MessageLogEntry(time, src, dst, len(payload), kind))
                out.append((src, payload))
        return out
