"""Proxy-side media-session metrics and the training dataset format."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

FEATURE_NAMES = [
    "bandwidth_mbps",
    "bitrate_mbps",
    "seg_size_bytes",
    "download_time_s",
    "inter_request_time_s",
    "seg_index",
    "prev_switch",
]
LABEL_NAME = "next_bitrate_mbps"
PROVENANCE = ["player_id", "run_seed", "config_hash"]


@dataclass(frozen=True)
class FeatureVector:
    bandwidth: float
    bitrate: float
    seg_size: int
    download_time: float
    inter_request_time: float
    seg_index: int
    prev_switch: int

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class SessionRecord:
    features: FeatureVector
    next_bitrate: float
    player_id: int = -1
    run_seed: int = -1
    config_hash: str = ""


@dataclass
class _Served:
    index: int
    rep_index: int
    bitrate: float
    bytes: int
    t_request: float
    t_done: float


@dataclass
class _History:
    served: list[_Served] = field(default_factory=list)
    bandwidth: float = 0.0
    pending: FeatureVector | None = None
    open_request: float | None = None


class SessionTracker:
    """Builds feature vectors from what the proxy sees of each player's session.

    A player's first served segment yields no vector (no history to compare
    with); from the second one on, each served segment yields a vector that
    gets labelled with the bitrate of that player's following request.
    """

    def __init__(self, bitrates: list[float], alpha: float = 0.3):
        self.bitrates = bitrates
        self.alpha = alpha
        self.players: dict[int, _History] = {}
        self.records: list[SessionRecord] = []

    def on_request(self, player_id: int, index: int, rep_index: int, t: float) -> None:
        h = self.players.setdefault(player_id, _History())
        if h.pending is not None:
            self.records.append(SessionRecord(h.pending, self.bitrates[rep_index - 1], player_id))
            h.pending = None
        h.open_request = t

    def on_served(self, player_id: int, index: int, rep_index: int, nbytes: int,
                  t_request: float, t_send: float, t_done: float) -> FeatureVector | None:
        """Record one served segment; ``t_send`` is when the proxy started the radio leg."""
        h = self.players.setdefault(player_id, _History())
        # the proxy only observes its own delivery leg, not the player's end-to-end view
        measured = nbytes * 8 / 1e6 / max(t_done - t_send, 1e-9)
        h.bandwidth = measured if not h.served else self.alpha * measured + (1 - self.alpha) * h.bandwidth
        h.served.append(_Served(index, rep_index, self.bitrates[rep_index - 1], nbytes, t_request, t_done))
        h.pending = self.features(player_id)
        return h.pending

    def features(self, player_id: int) -> FeatureVector | None:
        h = self.players.get(player_id)
        if h is None or len(h.served) < 2:
            return None
        cur, prev = h.served[-1], h.served[-2]
        return FeatureVector(
            bandwidth=h.bandwidth,
            bitrate=cur.bitrate,
            seg_size=cur.bytes,
            download_time=cur.t_done - cur.t_request,
            inter_request_time=cur.t_request - prev.t_request,
            seg_index=cur.index,
            prev_switch=cur.rep_index - prev.rep_index,
        )


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    provenance: list[tuple[int, int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_records(cls, records: Iterable[SessionRecord]) -> "Dataset":
        records = list(records)
        X = np.array([r.features.as_array() for r in records], dtype=float).reshape(len(records), len(FEATURE_NAMES))
        y = np.array([r.next_bitrate for r in records], dtype=float)
        prov = [(r.player_id, r.run_seed, r.config_hash) for r in records]
        return cls(X, y, prov)

    def subset(self, idx: np.ndarray) -> "Dataset":
        prov = [self.provenance[i] for i in idx] if self.provenance else []
        return Dataset(self.X[idx], self.y[idx], prov)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_dataset_csv(records: Iterable[SessionRecord], path: Path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_NAMES + [LABEL_NAME] + PROVENANCE)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r.features)] + [_fmt(r.next_bitrate)]
                       + [r.player_id, r.run_seed, r.config_hash])
            n += 1
    return n


def read_dataset_csv(path: Path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FEATURE_NAMES + [LABEL_NAME] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: dataset is empty")
    X = np.array([[float(r[c]) for c in FEATURE_NAMES] for r in rows])
    y = np.array([float(r[LABEL_NAME]) for r in rows])
    prov = [(int(r.get("player_id", -1)), int(r.get("run_seed", -1)), r.get("config_hash", "")) for r in rows]
    return Dataset(X, y, prov)
