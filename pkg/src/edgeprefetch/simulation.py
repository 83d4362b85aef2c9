"""One simulated streaming session: players, radio/backhaul links and the edge cache."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

from edgeprefetch.cache import CacheStats, EdgeCache, EventLog, Strategy
from edgeprefetch.config import ScenarioConfig
from edgeprefetch.engine import EventQueue, rng_stream
from edgeprefetch.forecast.features import FeatureVector, SessionRecord, SessionTracker
from edgeprefetch.media import SegmentId
from edgeprefetch.network import Link
from edgeprefetch.player import NextRequest, Player, PlayerTrace, arrivals


class Predictor(Protocol):
    def predict_one(self, fv: FeatureVector) -> float: ...


@dataclass
class RunResult:
    strategy: Strategy
    seed: int
    config_hash: str
    traces: list[PlayerTrace]
    stats: CacheStats
    log: EventLog
    records: list[SessionRecord]
    end_time: float
    events: int
    radio: Link
    backhaul: Link


class Simulation:
    """Wires players, links and the proxy for one (config, strategy, seed).

    ``model`` drives PREDICTIVE prefetch from proxy-side features; with
    ``oracle=True`` the proxy instead prefetches exactly the representation
    the player is about to request (a test hook bounding what prediction
    can achieve).
    """

    def __init__(self, cfg: ScenarioConfig, strategy: Strategy | str | None = None,
                 seed: int | None = None, model: Predictor | None = None, oracle: bool = False):
        self.cfg = cfg
        self.strategy = Strategy.parse(strategy or cfg.strategy)
        self.seed = cfg.seed if seed is None else seed
        if self.strategy is Strategy.PREDICTIVE and model is None and not oracle:
            raise ValueError("predictive strategy needs a trained model (--model) or the oracle (--oracle)")
        self.model = model
        self.oracle = oracle
        self.manifest = cfg.manifest()
        self.queue = EventQueue()
        self.radio = Link(self.queue, cfg.link_spec("radio"), "radio")
        self.backhaul = Link(self.queue, cfg.link_spec("backhaul"), "backhaul")
        self.log = EventLog()
        self.cache = EdgeCache(self.queue, self.manifest, self.strategy, self.radio, self.backhaul,
                               cfg.ttl, self.log)
        self.tracker = SessionTracker(self.manifest.bitrates, cfg.forecast.ewma_alpha)
        self._rep_of_bitrate = {b: i for i, b in enumerate(self.manifest.bitrates, start=1)}
        times = arrivals(cfg.players.count, cfg.players, rng_stream(self.seed, "arrivals"))
        self.players = [Player(i, self.manifest, cfg.players, t) for i, t in enumerate(times)]

    def _rep_for(self, bitrate: float) -> int:
        rep = self._rep_of_bitrate.get(bitrate)
        if rep is None:
            rates = np.array(self.manifest.bitrates)
            rep = int(np.argmin(np.abs(rates - bitrate))) + 1
        return rep

    def _request(self, player: Player, nr: NextRequest) -> None:
        now = self.queue.now
        seg = SegmentId(nr.index, nr.rep_index)
        self.tracker.on_request(player.id, nr.index, nr.rep_index, now)
        self.cache.handle_request(
            player.id, seg, lambda nbytes, t_send, t: self._delivered(player, seg, nbytes, now, t_send, t))

    def _delivered(self, player: Player, seg: SegmentId, nbytes: int, t_req: float,
                   t_send: float, t_done: float) -> None:
        action = player.on_segment_delivered(seg.index, nbytes, t_req, t_done)
        fv = self.tracker.on_served(player.id, seg.index, seg.rep_index, nbytes, t_req, t_send, t_done)
        if action is not None and self.strategy is not Strategy.LEGACY:
            predicted = None
            if self.strategy is Strategy.PREDICTIVE:
                if self.oracle:
                    predicted = action.rep_index
                elif fv is not None:
                    predicted = self._rep_for(self.model.predict_one(fv))
            self._prefetch(player.id, action.index, predicted)
        if action is None:
            player.finish()
        else:
            self.queue.schedule(action.at, lambda: self._request(player, action), "request")

    def _prefetch(self, player_id: int, index: int, rep: int | None) -> None:
        latency = self.cfg.forecast.query_latency
        if latency > 0 and self.strategy is Strategy.PREDICTIVE:
            self.queue.schedule_in(latency, lambda: self.cache.prefetch(player_id, index, rep), "prefetch")
        else:
            self.cache.prefetch(player_id, index, rep)

    def run(self) -> RunResult:
        for p in self.players:
            nr = p.first_request()
            self.queue.schedule(nr.at, lambda p=p, nr=nr: self._request(p, nr), "arrival")
        events = self.queue.run()
        unfinished = [p.id for p in self.players if not p.trace.complete]
        if unfinished:
            raise RuntimeError(f"players {unfinished} did not finish")
        chash = self.cfg.hash()
        records = [replace(r, run_seed=self.seed, config_hash=chash) for r in self.tracker.records]
        return RunResult(self.strategy, self.seed, chash, [p.trace for p in self.players],
                         self.cache.stats, self.log, records, self.queue.now, events,
                         self.radio, self.backhaul)


def simulate(cfg: ScenarioConfig, strategy: Strategy | str | None = None, seed: int | None = None,
             model: Predictor | None = None, oracle: bool = False) -> RunResult:
    return Simulation(cfg, strategy, seed, model, oracle).run()
