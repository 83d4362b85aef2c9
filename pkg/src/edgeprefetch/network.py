"""Processor-sharing link model driven by the event queue."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from edgeprefetch.engine import EventQueue

_EPS_BITS = 1e-6


@dataclass(frozen=True)
class LinkSpec:
    """Constant capacity or a piecewise-constant (time_s, mbps) trace, plus a one-off RTT."""

    capacity: float | Sequence[tuple[float, float]] = 100.0
    rtt: float = 0.0

    def __post_init__(self) -> None:
        if self.rtt < 0:
            raise ValueError("rtt: must be non-negative")
        if isinstance(self.capacity, (int, float)):
            if not self.capacity > 0:
                raise ValueError("capacity: must be positive")
            return
        points = [(float(t), float(c)) for t, c in self.capacity]
        if not points or points[0][0] != 0.0:
            raise ValueError("capacity: trace must start at time 0")
        for (t0, _), (t1, _) in zip(points, points[1:]):
            if t1 <= t0:
                raise ValueError("capacity: trace times must be strictly increasing")
        if any(c <= 0 for _, c in points):
            raise ValueError("capacity: trace values must be positive")
        object.__setattr__(self, "capacity", tuple(points))

    @property
    def breakpoints(self) -> list[float]:
        if isinstance(self.capacity, tuple):
            return [t for t, _ in self.capacity]
        return [0.0]

    def capacity_at(self, t: float) -> float:
        """Capacity in Mbps at time t."""
        if not isinstance(self.capacity, tuple):
            return float(self.capacity)
        i = bisect.bisect_right(self.breakpoints, t) - 1
        return self.capacity[max(i, 0)][1]

    def next_breakpoint(self, t: float) -> float | None:
        bps = self.breakpoints
        i = bisect.bisect_right(bps, t)
        return bps[i] if i < len(bps) else None


def load_trace_csv(path: str | Path) -> list[tuple[float, float]]:
    """Read a ``time_s,mbps`` capacity trace."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["time_s", "mbps"]:
            raise ValueError(f"{path}: expected header 'time_s,mbps', got {reader.fieldnames}")
        return [(float(row["time_s"]), float(row["mbps"])) for row in reader]


def allocate_bandwidth(spec: LinkSpec, flow_ids: Sequence[int], now: float) -> dict[int, float]:
    """Equal split of the current capacity (Mbps) across active flows."""
    if not flow_ids:
        return {}
    share = spec.capacity_at(now) / len(flow_ids)
    return {fid: share for fid in flow_ids}


@dataclass
class Flow:
    id: int
    link: str
    nbytes: int
    started_at: float
    bits_remaining: float
    on_done: Callable[[float], None] = field(repr=False)
    joined_at: float | None = None


class Link:
    """A shared link whose active flows split capacity equally.

    ``start`` charges the RTT once, then the flow joins the shared pool; the
    completion callback receives the completion time. Rates are re-derived
    whenever a flow joins or leaves and at every trace breakpoint.
    """

    def __init__(self, queue: EventQueue, spec: LinkSpec, name: str = "link"):
        self.queue = queue
        self.spec = spec
        self.name = name
        self.active: dict[int, Flow] = {}
        self._next_id = 0
        self._last = 0.0
        self._generation = 0
        self.delivered_bits = 0.0
        self.busy_capacity_bits = 0.0  # integral of capacity over time with >= 1 active flow
        self.completed = 0

    def start(self, nbytes: int, on_done: Callable[[float], None]) -> Flow:
        if nbytes < 0:
            raise ValueError("nbytes must be non-negative")
        flow = Flow(self._next_id, self.name, nbytes, self.queue.now, nbytes * 8.0, on_done)
        self._next_id += 1
        self.queue.schedule_in(self.spec.rtt, lambda: self._join(flow), f"{self.name}:join")
        return flow

    def rates(self) -> dict[int, float]:
        return allocate_bandwidth(self.spec, sorted(self.active), self.queue.now)

    def _join(self, flow: Flow) -> None:
        self._advance()
        flow.joined_at = self.queue.now
        self.active[flow.id] = flow
        self._finish_and_reschedule()

    def _advance(self) -> None:
        """Drain active flows from the last update up to the current clock."""
        now = self.queue.now
        t = self._last
        while t < now and self.active:
            nb = self.spec.next_breakpoint(t)
            t_next = now if nb is None else min(now, nb)
            cap_bits = self.spec.capacity_at(t) * 1e6
            dt = t_next - t
            share = cap_bits / len(self.active) * dt
            for flow in self.active.values():
                used = min(share, flow.bits_remaining)
                flow.bits_remaining -= share
                self.delivered_bits += used
            self.busy_capacity_bits += cap_bits * dt
            t = t_next
        self._last = now

    def _finish_and_reschedule(self) -> None:
        now = self.queue.now
        eps = _EPS_BITS
        if self.active:
            # anything finishing within a nanosecond is done; avoids zero-length wakeups
            eps = max(eps, self.spec.capacity_at(now) * 1e6 / len(self.active) * 1e-9)
        done = [f for f in self.active.values() if f.bits_remaining <= eps]
        for f in done:
            del self.active[f.id]
        self._generation += 1
        if self.active:
            gen = self._generation
            self.queue.schedule(self._next_wakeup(now), lambda: self._wake(gen), f"{self.name}:wake")
        for f in sorted(done, key=lambda f: f.id):
            f.bits_remaining = 0.0
            self.completed += 1
            f.on_done(now)

    def _next_wakeup(self, now: float) -> float:
        min_bits = min(f.bits_remaining for f in self.active.values())
        rate = self.spec.capacity_at(now) * 1e6 / len(self.active)
        t_done = now + min_bits / rate
        nb = self.spec.next_breakpoint(now)
        if nb is not None and nb < t_done:
            return nb
        return t_done

    def _wake(self, gen: int) -> None:
        if gen != self._generation:
            return
        self._advance()
        self._finish_and_reschedule()


def transfer_time(nbytes: int, spec: LinkSpec, start: float = 0.0) -> float:
    """Completion time of a lone flow on an otherwise idle link (closed-form helper)."""
    t = start + spec.rtt
    bits = nbytes * 8.0
    while True:
        rate = spec.capacity_at(t) * 1e6
        nb = spec.next_breakpoint(t)
        if nb is None or t + bits / rate <= nb:
            return t + bits / rate
        bits -= rate * (nb - t)
        t = nb
