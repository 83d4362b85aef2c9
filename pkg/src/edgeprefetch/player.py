"""DASH player model: arrivals, throughput-based ABR, buffer and stall dynamics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from edgeprefetch.engine import gp_sample
from edgeprefetch.media import Manifest, Representation


@dataclass
class PlayerConfig:
    count: int = 20
    safety: float = 0.9
    ewma_alpha: float = 0.3
    startup_segments: int = 2
    max_buffer: float = 20.0
    arrival_theta: float = 2.0
    arrival_lambda: float = 0.2
    gap_unit: float = 2.0

    def errors(self, segment_duration: float | None = None) -> list[str]:
        out = []
        if self.count < 1:
            out.append("players.count: must be >= 1")
        if not 0 < self.safety <= 1:
            out.append("players.safety: must lie in (0, 1]")
        if not 0 < self.ewma_alpha <= 1:
            out.append("players.ewma_alpha: must lie in (0, 1]")
        if self.startup_segments < 1:
            out.append("players.startup_segments: must be >= 1")
        if self.max_buffer <= 0:
            out.append("players.max_buffer: must be positive")
        elif segment_duration is not None and self.startup_segments * segment_duration > self.max_buffer:
            out.append("players.max_buffer: must hold at least startup_segments segments")
        if self.arrival_theta <= 0:
            out.append("players.arrival_theta: must be positive")
        if not 0 <= self.arrival_lambda < 1:
            out.append("players.arrival_lambda: must lie in [0, 1)")
        if self.gap_unit <= 0:
            out.append("players.gap_unit: must be positive")
        return out


def arrivals(n_players: int, cfg: PlayerConfig, rng: np.random.Generator) -> list[float]:
    """Arrival times: first player at 0, then cumulative GP-distributed gaps."""
    if n_players < 1:
        raise ValueError("n_players must be >= 1")
    gaps = gp_sample(cfg.arrival_theta, cfg.arrival_lambda, rng, size=n_players - 1) * cfg.gap_unit
    return [0.0] + np.cumsum(gaps).astype(float).tolist()


def abr_select(est: float, ladder: Sequence[Representation], safety: float) -> int:
    """Highest representation whose bitrate fits under safety * est; rep 1 otherwise."""
    budget = safety * est
    chosen = ladder[0].index
    for rep in ladder:
        if rep.bitrate <= budget:
            chosen = rep.index
    return chosen


@dataclass
class SegmentRecord:
    index: int
    rep_index: int
    bitrate: float
    bytes: int
    t_request: float
    t_delivered: float


@dataclass
class StallEvent:
    start: float
    duration: float


@dataclass
class PlayerTrace:
    player_id: int
    arrival: float
    records: list[SegmentRecord] = field(default_factory=list)
    stalls: list[StallEvent] = field(default_factory=list)
    playback_start: float | None = None
    end_time: float | None = None
    # snapshot taken at the final delivery, for conservation checks
    played_at_last_delivery: float = 0.0
    buffer_at_last_delivery: float = 0.0

    @property
    def complete(self) -> bool:
        return self.end_time is not None


@dataclass
class PlayerState:
    buffer: float = 0.0
    position: float = 0.0
    throughput_est: float = 0.0
    current_rep: int = 1
    stalled: bool = False
    next_segment: int = 1
    playing: bool = False
    last_update: float = 0.0
    stall_start: float | None = None
    delivered: int = 0


@dataclass(frozen=True)
class NextRequest:
    index: int
    rep_index: int
    at: float


class Player:
    def __init__(self, player_id: int, manifest: Manifest, cfg: PlayerConfig, arrival: float):
        self.id = player_id
        self.manifest = manifest
        self.cfg = cfg
        self.state = PlayerState(last_update=arrival)
        self.trace = PlayerTrace(player_id, arrival)
        self.pending: NextRequest | None = None

    def first_request(self) -> NextRequest:
        rep = abr_select(self.state.throughput_est, self.manifest.ladder, self.cfg.safety)
        self.pending = NextRequest(1, rep, self.trace.arrival)
        return self.pending

    def _advance(self, t: float) -> None:
        st = self.state
        if st.playing and not st.stalled:
            elapsed = t - st.last_update
            if st.buffer >= elapsed:
                st.buffer -= elapsed
                st.position += elapsed
            else:
                st.position += st.buffer
                st.stall_start = st.last_update + st.buffer
                st.buffer = 0.0
                st.stalled = True
        st.last_update = t

    def on_segment_delivered(self, index: int, nbytes: int, t_req: float, t_done: float) -> NextRequest | None:
        """Apply one delivery; returns the next request to issue, or None after the last segment."""
        st = self.state
        if index != st.next_segment or self.pending is None or self.pending.index != index:
            raise RuntimeError(f"player {self.id}: got segment {index}, expected {st.next_segment}")
        rep_index = self.pending.rep_index
        self._advance(t_done)

        measured = nbytes * 8 / 1e6 / max(t_done - t_req, 1e-9)
        if st.delivered == 0:
            st.throughput_est = measured
        else:
            a = self.cfg.ewma_alpha
            st.throughput_est = a * measured + (1 - a) * st.throughput_est
        dur = self.manifest.duration(index)
        st.buffer += dur
        st.delivered += 1
        st.current_rep = rep_index
        st.next_segment = index + 1
        self.trace.records.append(SegmentRecord(
            index, rep_index, self.manifest.rep(rep_index).bitrate, nbytes, t_req, t_done))

        if st.stalled:
            self.trace.stalls.append(StallEvent(st.stall_start, t_done - st.stall_start))
            st.stalled = False
            st.stall_start = None
        last = index == self.manifest.segment_count
        if not st.playing and (st.delivered >= self.cfg.startup_segments or last):
            st.playing = True
            self.trace.playback_start = t_done

        if last:
            self.pending = None
            self.trace.played_at_last_delivery = st.position
            self.trace.buffer_at_last_delivery = st.buffer
            self.trace.end_time = t_done + st.buffer
            return None

        rep = abr_select(st.throughput_est, self.manifest.ladder, self.cfg.safety)
        at = t_done
        if st.playing:
            # request only once the next segment fits under the buffer cap
            room = self.cfg.max_buffer - self.manifest.duration(index + 1)
            if st.buffer > room:
                at = t_done + (st.buffer - room)
        self.pending = NextRequest(index + 1, rep, at)
        return self.pending

    def finish(self) -> None:
        """Play out the remaining buffer after the final delivery."""
        st = self.state
        if self.trace.end_time is None:
            raise RuntimeError(f"player {self.id} has not received its last segment")
        st.position += st.buffer
        st.buffer = 0.0
        st.last_update = self.trace.end_time


@dataclass
class PlayerMetrics:
    player_id: int
    r_avg: float
    switches: int
    stall_count: int
    stall_avg: float
    stall_total: float
    bitrate_std: float


def player_metrics(trace: PlayerTrace) -> PlayerMetrics:
    if not trace.records:
        raise ValueError(f"player {trace.player_id}: empty trace")
    rates = np.array([r.bitrate for r in trace.records])
    reps = [r.rep_index for r in trace.records]
    switches = sum(1 for a, b in zip(reps, reps[1:]) if a != b)
    durations = [s.duration for s in trace.stalls]
    total = float(sum(durations))
    return PlayerMetrics(
        player_id=trace.player_id,
        r_avg=float(rates.mean()),
        switches=switches,
        stall_count=len(durations),
        stall_avg=total / len(durations) if durations else 0.0,
        stall_total=total,
        bitrate_std=float(rates.std(ddof=1)) if len(rates) > 1 else 0.0,
    )


TRACE_HEADER = ["player_id", "seg_index", "rep_index", "bitrate_mbps", "bytes", "t_request", "t_delivered"]
STALL_HEADER = ["player_id", "start", "duration"]


def write_traces_csv(traces: Iterable[PlayerTrace], path: Path, preamble: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if preamble:
            fh.write(f"# {preamble}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for tr in traces:
            for r in tr.records:
                w.writerow([tr.player_id, r.index, r.rep_index, repr(r.bitrate), r.bytes,
                            repr(r.t_request), repr(r.t_delivered)])


def write_stalls_csv(traces: Iterable[PlayerTrace], path: Path, preamble: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if preamble:
            fh.write(f"# {preamble}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STALL_HEADER)
        for tr in traces:
            for s in tr.stalls:
                w.writerow([tr.player_id, repr(s.start), repr(s.duration)])


def read_traces_csv(trace_path: Path, stall_path: Path | None = None) -> list[PlayerTrace]:
    """Rebuild traces (records and stalls only) from exported CSVs."""
    traces: dict[int, PlayerTrace] = {}
    with open(trace_path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            pid = int(row["player_id"])
            tr = traces.setdefault(pid, PlayerTrace(pid, 0.0))
            tr.records.append(SegmentRecord(
                int(row["seg_index"]), int(row["rep_index"]), float(row["bitrate_mbps"]),
                int(row["bytes"]), float(row["t_request"]), float(row["t_delivered"])))
    if stall_path is not None:
        with open(stall_path, newline="") as fh:
            for row in csv.DictReader(line for line in fh if not line.startswith("#")):
                traces[int(row["player_id"])].stalls.append(
                    StallEvent(float(row["start"]), float(row["duration"])))
    for tr in traces.values():
        tr.arrival = tr.records[0].t_request
    return [traces[k] for k in sorted(traces)]
