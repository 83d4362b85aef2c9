"""Representation ladder, manifest, segment sizing and the origin server."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from edgeprefetch.engine import rng_stream


@dataclass(frozen=True)
class Representation:
    index: int
    bitrate: float  # Mbps
    width: int
    height: int
    codec: str = "HEVC"
    framerate: float = 24.0

    @property
    def resolution(self) -> str:
        return f"{self.width}x{self.height}"


# six-rung HEVC ladder, 24 fps
DEFAULT_LADDER: tuple[Representation, ...] = (
    Representation(1, 0.5, 640, 360),
    Representation(2, 1.4, 1280, 720),
    Representation(3, 5.5, 1920, 1080),
    Representation(4, 11.0, 3840, 2160),
    Representation(5, 20.0, 5120, 2880),
    Representation(6, 27.5, 7680, 4320),
)


@dataclass(frozen=True, order=True)
class SegmentId:
    index: int
    rep_index: int


@dataclass(frozen=True)
class TransferDescriptor:
    seg: SegmentId
    bytes: int
    source: str = "origin"


@dataclass
class Manifest:
    ladder: tuple[Representation, ...] = DEFAULT_LADDER
    segment_duration: float = 4.0
    total_duration: float = 322.0
    jitter: float = 0.15
    seed: int = 0
    _factors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.ladder = tuple(self.ladder)
        self.validate()
        rng = rng_stream(self.seed, "segment-size-jitter")
        self._factors = rng.uniform(1.0 - self.jitter, 1.0 + self.jitter,
                                    size=(self.segment_count, len(self.ladder)))

    def validate(self) -> None:
        if not self.ladder:
            raise ValueError("ladder: must contain at least one representation")
        for pos, rep in enumerate(self.ladder, start=1):
            if rep.index != pos:
                raise ValueError(f"ladder: representation indices must be 1..R in order, got {rep.index} at {pos}")
            if rep.bitrate <= 0:
                raise ValueError(f"ladder: bitrate of rep {rep.index} must be positive")
        rates = [r.bitrate for r in self.ladder]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("ladder: bitrates must be strictly increasing")
        if self.segment_duration <= 0:
            raise ValueError("segment_duration: must be positive")
        if self.total_duration <= 0:
            raise ValueError("total_duration: must be positive")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter: must lie in [0, 1)")
        # sizes must stay ordered by rep for every segment
        for a, b in zip(rates, rates[1:]):
            if self.jitter >= (b - a) / (b + a):
                raise ValueError(
                    f"jitter: {self.jitter} lets size of {a} Mbps overtake {b} Mbps; "
                    f"must be < {(b - a) / (b + a):.4f}")

    @property
    def segment_count(self) -> int:
        return math.ceil(self.total_duration / self.segment_duration - 1e-9)

    @property
    def rep_count(self) -> int:
        return len(self.ladder)

    @property
    def bitrates(self) -> list[float]:
        return [r.bitrate for r in self.ladder]

    def rep(self, rep_index: int) -> Representation:
        if not 1 <= rep_index <= len(self.ladder):
            raise IndexError(f"rep_index {rep_index} outside 1..{len(self.ladder)}")
        return self.ladder[rep_index - 1]

    def check(self, seg: SegmentId) -> None:
        if not 1 <= seg.index <= self.segment_count:
            raise IndexError(f"segment index {seg.index} outside 1..{self.segment_count}")
        self.rep(seg.rep_index)

    def duration(self, index: int) -> float:
        if not 1 <= index <= self.segment_count:
            raise IndexError(f"segment index {index} outside 1..{self.segment_count}")
        if index < self.segment_count:
            return self.segment_duration
        return self.total_duration - (self.segment_count - 1) * self.segment_duration

    def segment_size(self, seg: SegmentId) -> int:
        """Bytes of one segment: nominal bitrate x duration, scaled by a fixed jitter factor."""
        self.check(seg)
        nominal = self.rep(seg.rep_index).bitrate * 1e6 * self.duration(seg.index) / 8
        factor = self._factors[seg.index - 1, seg.rep_index - 1] if self.jitter > 0 else 1.0
        return int(round(nominal * factor))

    def origin_fetch(self, seg: SegmentId) -> TransferDescriptor:
        return TransferDescriptor(seg, self.segment_size(seg), "origin")
