"""Edge cache proxy: request serving, strategy prefetch, TTL revalidation and accounting."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from edgeprefetch.engine import EventQueue
from edgeprefetch.media import Manifest, SegmentId
from edgeprefetch.network import Link

Delivered = Callable[[int, float, float], None]  # (bytes, radio-leg start, completion time)


class Strategy(str, enum.Enum):
    LEGACY = "legacy"
    PREEMPTIVE = "preemptive"
    PREDICTIVE = "predictive"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown strategy {value!r}; choose from "
                             f"{', '.join(s.value for s in cls)}") from None


INFLIGHT = "in-flight"
READY = "ready"


@dataclass
class CacheEntry:
    key: SegmentId
    bytes: int
    state: str = INFLIGHT
    expires_at: float | None = None
    waiters: list[Callable[[float], None]] = field(default_factory=list, repr=False)

    def live(self, now: float) -> bool:
        return self.state == INFLIGHT or now < self.expires_at


@dataclass
class CacheStats:
    requests: int = 0
    hits: int = 0
    served_bytes: int = 0
    cached_bytes: int = 0
    hit_bytes: int = 0
    miss_origin_bytes: int = 0
    prefetches: int = 0
    revalidations: int = 0
    evictions: int = 0

    @property
    def misses(self) -> int:
        return self.requests - self.hits

    def merged(self, other: "CacheStats") -> "CacheStats":
        return CacheStats(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})


def hit_ratio(stats: CacheStats) -> float:
    if stats.requests == 0:
        raise ValueError("hit ratio undefined without requests")
    return stats.hits / stats.requests


def data_saved(stats: CacheStats) -> float:
    """Percent of served volume not paid for by prefetch traffic from the origin."""
    if stats.served_bytes == 0:
        raise ValueError("data saved undefined when nothing was served")
    return 100.0 * (stats.served_bytes - stats.cached_bytes) / stats.served_bytes


EVENT_HEADER = ["t", "event", "seg_index", "rep_index", "bytes", "player_id"]


@dataclass(frozen=True)
class LogRow:
    t: float
    event: str
    seg_index: int
    rep_index: int
    bytes: int
    player_id: int  # -1 when no player is involved


class EventLog:
    """Cache event log.

    ``hit``/``miss`` rows are player requests (a hit also revalidates);
    ``revalidate`` rows are prefetch attempts that found an existing entry.
    """

    def __init__(self) -> None:
        self.rows: list[LogRow] = []

    def add(self, t: float, event: str, seg: SegmentId, nbytes: int, player_id: int = -1) -> None:
        self.rows.append(LogRow(t, event, seg.index, seg.rep_index, nbytes, player_id))

    def write_csv(self, path: Path, preamble: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if preamble:
                fh.write(f"# {preamble}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVENT_HEADER)
            for r in self.rows:
                w.writerow([repr(r.t), r.event, r.seg_index, r.rep_index, r.bytes, r.player_id])


def read_event_log(path: Path) -> list[LogRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [LogRow(float(r["t"]), r["event"], int(r["seg_index"]), int(r["rep_index"]),
                       int(r["bytes"]), int(r["player_id"])) for r in reader]


class EdgeCache:
    def __init__(self, queue: EventQueue, manifest: Manifest, strategy: Strategy | str,
                 radio: Link, backhaul: Link, ttl: float | None = None,
                 log: EventLog | None = None):
        self.queue = queue
        self.manifest = manifest
        self.strategy = Strategy.parse(strategy)
        self.radio = radio
        self.backhaul = backhaul
        self.ttl = 2 * manifest.segment_duration if ttl is None else ttl
        self.log = log if log is not None else EventLog()
        self.entries: dict[SegmentId, CacheEntry] = {}
        self.stats = CacheStats()

    def evict_expired(self, now: float | None = None) -> int:
        now = self.queue.now if now is None else now
        expired = [k for k, e in self.entries.items() if e.state == READY and e.expires_at <= now]
        for key in sorted(expired):
            entry = self.entries.pop(key)
            self.stats.evictions += 1
            self.log.add(now, "evict", key, entry.bytes)
        return len(expired)

    def lookup(self, seg: SegmentId) -> CacheEntry | None:
        entry = self.entries.get(seg)
        if entry is not None and entry.live(self.queue.now):
            return entry
        return None

    def handle_request(self, player_id: int, seg: SegmentId, on_delivered: Delivered) -> bool:
        """Serve one player request; returns True on a hit."""
        self.manifest.check(seg)
        now = self.queue.now
        self.evict_expired(now)
        size = self.manifest.segment_size(seg)
        st = self.stats
        st.requests += 1
        st.served_bytes += size
        entry = self.lookup(seg)
        if entry is not None:
            st.hits += 1
            st.hit_bytes += size
            self.log.add(now, "hit", seg, size, player_id)
            if entry.state == READY:
                entry.expires_at = now + self.ttl
                self._to_player(size, on_delivered)
            else:
                entry.waiters.append(lambda t: self._to_player(size, on_delivered))
            return True
        st.miss_origin_bytes += size
        self.log.add(now, "miss", seg, size, player_id)
        # pass-through: origin bytes are relayed, never inserted
        self.backhaul.start(size, lambda t: self._to_player(size, on_delivered))
        return False

    def _to_player(self, size: int, on_delivered: Delivered) -> None:
        t_send = self.queue.now
        self.radio.start(size, lambda t: on_delivered(size, t_send, t))

    def prefetch(self, player_id: int, next_index: int, predicted_rep: int | None = None) -> list[SegmentId]:
        """Strategy prefetch of ``next_index``; returns the segments whose origin fetch started."""
        if self.strategy is Strategy.LEGACY or next_index > self.manifest.segment_count:
            return []
        if self.strategy is Strategy.PREEMPTIVE:
            reps = [r.index for r in self.manifest.ladder]
        elif predicted_rep is None:
            return []
        else:
            reps = [predicted_rep]
        now = self.queue.now
        self.evict_expired(now)
        started = []
        for rep in reps:
            seg = SegmentId(next_index, rep)
            self.manifest.check(seg)
            entry = self.lookup(seg)
            if entry is not None:
                if entry.state == READY:
                    entry.expires_at = now + self.ttl
                self.stats.revalidations += 1
                self.log.add(now, "revalidate", seg, entry.bytes, player_id)
                continue
            size = self.manifest.segment_size(seg)
            entry = CacheEntry(seg, size)
            self.entries[seg] = entry
            self.stats.prefetches += 1
            self.stats.cached_bytes += size
            self.log.add(now, "prefetch_start", seg, size, player_id)
            self.backhaul.start(size, lambda t, e=entry: self._ready(e, t))
            started.append(seg)
        return started

    def _ready(self, entry: CacheEntry, t: float) -> None:
        entry.state = READY
        entry.expires_at = t + self.ttl
        self.log.add(t, "prefetch_ready", entry.key, entry.bytes)
        waiters, entry.waiters = entry.waiters, []
        for w in waiters:
            w(t)
