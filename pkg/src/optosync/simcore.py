"""Deterministic discrete-event core.

Every quantity of time in this package is an integer count of
picoseconds.  At that resolution the nanosecond-scale optics numbers and
the sub-nanosecond sync errors this simulator reproduces are all exact
integers, so no module ever needs floating point for time itself.
Floats appear only inside noise sampling and summary statistics.

The engine dispatches events in strict ``(fire_at, seq)`` order, where
``seq`` is assigned once at scheduling time.  Two runs that schedule the
same work with the same seed therefore replay identically, byte for
byte, in the exported trace.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import math
import random
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .errors import EmptyLabel, SchedulingInPast

# The single time currency: integer picoseconds.
SimTime = int
Duration = int

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
SEC = 1_000_000_000_000

# Closed vocabulary of event kinds.  Keeping this a frozen set makes the
# "agents never message each other" property checkable from traces.
EVENT_KINDS = frozenset({
    "ptp-message-arrival",
    "pps-edge",
    "uart-delivery",
    "actuation",
    "power-sample",
    "failure-injection",
    "controller-timer",
    "notification-arrival",
})

TRACE_COLUMNS = ("fire_at_ps", "seq", "kind", "node", "detail")


def div_round_half_away(num: int, den: int) -> int:
    """Divide integers, rounding halves away from zero.

    ``den`` must be positive.  This is the one rounding rule used for
    every time conversion in the package; pinning a single rule keeps
    forward and inverse clock mappings consistent to within 1 ps.
    """
    if den <= 0:
        raise ValueError("denominator must be positive, got %d" % den)
    if num >= 0:
        return (2 * num + den) // (2 * den)
    return -((-2 * num + den) // (2 * den))


def round_half_away(value: float) -> int:
    """Round a float to the nearest integer, halves away from zero."""
    if value >= 0:
        return math.floor(value + 0.5)
    return math.ceil(value - 0.5)


class RngStream:
    """Named random substream derived from ``(root_seed, label)``.

    The pair is hashed with SHA-256 and the digest seeds a private
    stdlib generator, so the same pair always reproduces the same
    sample sequence while distinct labels give unrelated streams.
    Streams never share state: drawing from one cannot perturb another,
    which is what makes per-link and per-direction noise reproducible
    independently of event interleaving.
    """

    def __init__(self, root_seed: int, label: str):
        if not label:
            raise EmptyLabel("rng stream label must be a non-empty string")
        self.root_seed = root_seed
        self.label = label
        digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
        self._gen = random.Random(int.from_bytes(digest, "big"))

    def random(self) -> float:
        return self._gen.random()

    def uniform(self, lo: float, hi: float) -> float:
        return self._gen.uniform(lo, hi)

    def gauss(self, sigma: float) -> float:
        """Zero-mean normal draw."""
        return self._gen.gauss(0.0, sigma)

    def gamma(self, shape: float, scale: float) -> float:
        return self._gen.gammavariate(shape, scale)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends included."""
        return self._gen.randint(lo, hi)

    def __repr__(self) -> str:
        return f"RngStream(root_seed={self.root_seed}, label={self.label!r})"


def fork_rng(root_seed: int, label: str) -> RngStream:
    """Fork the named substream for ``label`` from ``root_seed``."""
    return RngStream(root_seed, label)


@dataclass
class Event:
    """One scheduled occurrence.

    ``seq`` is the global scheduling order and doubles as the event id;
    it breaks ties between events that share a fire time.
    """

    fire_at: SimTime
    seq: int
    kind: str
    node: str
    detail: str
    callback: Optional[Callable[["Engine"], None]]


class TraceRecorder:
    """Append-only log of dispatched events.

    Rows are recorded in dispatch order, which the engine guarantees is
    the total (fire_at, seq) order, so equal runs produce equal traces.
    """

    def __init__(self):
        self.rows: list[tuple[int, int, str, str, str]] = []

    def record(self, event: Event) -> None:
        self.rows.append(
            (event.fire_at, event.seq, event.kind, event.node, event.detail)
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple[int, int, str, str, str]]:
        return iter(self.rows)


class Engine:
    """Single-threaded event loop over integer-picosecond time.

    Determinism rests on three rules:

    * events are totally ordered by (fire_at, seq), never by insertion
      luck or hash order;
    * ``seq`` is assigned at scheduling time from a monotone counter;
    * all randomness flows through named substreams forked from
      ``root_seed``, so interleaving cannot reorder draws.

    Scheduling at the current instant is allowed (the event runs after
    the current handler returns); scheduling in the past is an error.
    """

    def __init__(self, root_seed: int = 0):
        self.now: SimTime = 0
        self.root_seed = root_seed
        self.trace = TraceRecorder()
        self.scheduled_count = 0
        self.dispatched_count = 0
        self._next_seq = 0
        self._heap: list[tuple[SimTime, int, Event]] = []

    def rng(self, label: str) -> RngStream:
        """Fork the engine's named substream for ``label``."""
        return fork_rng(self.root_seed, label)

    def schedule(
        self,
        fire_at: SimTime,
        kind: str,
        callback: Optional[Callable[["Engine"], None]] = None,
        node: str = "",
        detail: str = "",
    ) -> int:
        """Enqueue an event; returns its seq id."""
        if fire_at < self.now:
            raise SchedulingInPast(
                f"cannot schedule {kind!r} at {fire_at} ps; now is {self.now} ps"
            )
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        seq = self._next_seq
        self._next_seq += 1
        event = Event(fire_at, seq, kind, node, detail, callback)
        heapq.heappush(self._heap, (fire_at, seq, event))
        self.scheduled_count += 1
        return seq

    @property
    def pending_count(self) -> int:
        return len(self._heap)

    def run_until(self, t_end: SimTime) -> TraceRecorder:
        """Dispatch every event with fire_at <= t_end, in order.

        The clock advances to t_end if events remain beyond it; if the
        queue drains first, the clock stops at the last dispatched
        event.  Returns the cumulative trace.
        """
        while self._heap and self._heap[0][0] <= t_end:
            fire_at, _seq, event = heapq.heappop(self._heap)
            self.now = fire_at
            self.trace.record(event)
            self.dispatched_count += 1
            if event.callback is not None:
                event.callback(self)
        if self._heap:
            self.now = t_end
        return self.trace
