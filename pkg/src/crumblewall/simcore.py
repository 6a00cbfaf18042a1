"""Deterministic discrete-event engine over a :class:`Topology`.

Events fire in ``(time, sequence)`` order; ``sequence`` is insertion order, so
equal timestamps are FIFO. All randomness comes from one
:class:`random.Random` (Mersenne Twister MT19937) per engine, seeded from
``(seed, scenario id)`` by :func:`derive_seed`.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
from typing import Any, Callable, NamedTuple

from .topology import NodeId, Topology, link_active, sample_delay

PROCESSING_DELAY = 0.001


def derive_seed(seed: int, scenario_id: str = "") -> int:
    """64-bit stream seed for one (seed, scenario) point."""
    digest = hashlib.sha256(f"{seed}:{scenario_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class TraceRecord(NamedTuple):
    time: float
    kind: str  # send | deliver | drop | timer | crash
    src: str | None = None
    dst: str | None = None
    ballot: str | None = None
    what: str | None = None

    def to_json(self) -> str:
        return json.dumps(self._asdict(), sort_keys=True)


class Engine:
    """Virtual clock, event queue and lossy direct-link transport.

    A message travels only if its link is active both when it is sent and when
    it would be delivered; otherwise it vanishes and the sender finds out only
    through its own timers.
    """

    def __init__(
        self,
        topology: Topology,
        seed: int = 0,
        *,
        processing_delay: float = PROCESSING_DELAY,
        record_trace: bool = True,
    ) -> None:
        self.topology = topology
        self.rng = random.Random(seed)
        self.processing_delay = processing_delay
        self.now = 0.0
        self.record_trace = record_trace
        self.trace: list[TraceRecord] = []
        # (fire_at, sequence, callback, args, trace record)
        self._queue: list[tuple] = []
        self._seq = 0
        for node, at in sorted(topology.crashed.items(), key=lambda kv: (kv[1], kv[0])):
            self._push(at, _noop, (), TraceRecord(at, "crash", node.label))

    def _push(self, at: float, callback, args, record=None) -> None:
        heapq.heappush(self._queue, (at, self._seq, callback, args, record))
        self._seq += 1

    def _log(self, record: TraceRecord) -> None:
        if self.record_trace:
            self.trace.append(record)

    def schedule(self, at: float, callback: Callable[..., Any], *args: Any, label: str | None = None) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} before clock {self.now}")
        self._push(at, callback, args, TraceRecord(at, "timer", what=label) if label else None)

    def crash(self, node: NodeId, at: float) -> None:
        """Crash-stop ``node`` at ``at``: it sends and receives nothing from then on."""
        if at < self.now:
            raise ValueError(f"cannot crash at {at} before clock {self.now}")
        self.topology = self.topology.with_crashes({node: at})
        self._push(at, _noop, (), TraceRecord(at, "crash", node.label))

    def _alive(self, node: NodeId) -> bool:
        return not self.topology.is_crashed(node, self.now)

    def send(self, src: NodeId, dst: NodeId, message: Any, deliver: Callable[[Any], Any]) -> None:
        ballot = getattr(message, "ballot", None)
        rec = (src.label, dst.label, None if ballot is None else str(ballot), type(message).__name__)
        if src == dst:
            ok = self._alive(src)
            delay = 0.0
        else:
            ok = link_active(self.topology, self.now, src, dst)
            delay = sample_delay(self.topology, src, dst, self.rng, self.now) if ok else 0.0
        if not ok:
            self._log(TraceRecord(self.now, "drop", *rec))
            return
        self._log(TraceRecord(self.now, "send", *rec))
        at = self.now + delay + self.processing_delay
        self._push(at, self._deliver, (src, dst, message, deliver, rec))

    def _deliver(self, src, dst, message, deliver, rec) -> None:
        if src == dst:
            ok = self._alive(dst)
        else:
            ok = link_active(self.topology, self.now, src, dst)
        if not ok:
            self._log(TraceRecord(self.now, "drop", *rec))
            return
        self._log(TraceRecord(self.now, "deliver", *rec))
        deliver(message)

    def run(self, until: float = math.inf) -> list[TraceRecord]:
        """Process events with ``fire_at <= until``; return the trace so far."""
        queue = self._queue
        while queue and queue[0][0] <= until:
            at, _, callback, args, record = heapq.heappop(queue)
            self.now = at
            if record is not None:
                self._log(record)
            callback(*args)
        return self.trace

    def step(self) -> bool:
        """Process the single next event; False when the queue is empty."""
        if not self._queue:
            return False
        at, _, callback, args, record = heapq.heappop(self._queue)
        self.now = at
        if record is not None:
            self._log(record)
        callback(*args)
        return True

    @property
    def pending(self) -> int:
        return len(self._queue)


def _noop() -> None:
    pass


def dump_trace(trace: list[TraceRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in trace:
            fh.write(r.to_json() + "\n")
