"""QoE scoring and the cache/player comparison reports."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from edgeprefetch.cache import CacheStats, Strategy, data_saved, hit_ratio
from edgeprefetch.media import Representation
from edgeprefetch.player import PlayerMetrics, PlayerTrace, player_metrics


@dataclass
class QoEConfig:
    stall_event_penalty: float = 0.5
    stall_second_penalty: float = 0.05
    stall_cap: float = 1.5
    switch_penalty: float = 0.01
    switch_cap: float = 0.5

    def errors(self) -> list[str]:
        return [f"qoe.{k}: must be non-negative" for k, v in asdict(self).items() if v < 0]


def qoe_score(trace: PlayerTrace, ladder: Sequence[Representation], cfg: QoEConfig | None = None) -> float:
    """MOS-like score in [1, 5] from log-scaled quality minus capped stall and switch penalties.

    A closed-form stand-in for a standardized audiovisual quality model.
    """
    cfg = cfg or QoEConfig()
    if not trace.records:
        raise ValueError(f"player {trace.player_id}: empty trace")
    b_min, b_max = ladder[0].bitrate, ladder[-1].bitrate
    rates = np.array([r.bitrate for r in trace.records])
    if b_max > b_min:
        quality = float(np.mean(np.log(rates / b_min) / math.log(b_max / b_min)))
    else:
        quality = 1.0
    m = player_metrics(trace)
    d_stall = min(cfg.stall_cap, cfg.stall_event_penalty * m.stall_count + cfg.stall_second_penalty * m.stall_total)
    d_switch = min(cfg.switch_cap, cfg.switch_penalty * m.switches)
    return float(min(5.0, max(1.0, 1.0 + 4.0 * quality - d_stall - d_switch)))


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0:
        raise ValueError("no values to aggregate")
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


@dataclass
class PlayerRow:
    player_id: int
    seed: int
    r_avg: float
    bitrate_std: float
    switches: int
    stall_count: int
    stall_avg: float
    stall_total: float
    qoe: float


@dataclass
class StrategyReport:
    strategy: str
    seeds: list[int]
    cache: CacheStats
    players: list[PlayerRow] = field(default_factory=list)

    @property
    def hit_ratio(self) -> float | None:
        if self.strategy == Strategy.LEGACY.value:
            return None
        return hit_ratio(self.cache)

    @property
    def data_saved(self) -> float | None:
        if self.strategy == Strategy.LEGACY.value:
            return None
        return data_saved(self.cache)

    def column(self, name: str) -> list[float]:
        return [getattr(p, name) for p in self.players]

    @property
    def player_summary(self) -> dict[str, float]:
        r_avg, r_dev = _mean_std(self.column("r_avg"))
        qoe_avg, qoe_dev = _mean_std(self.column("qoe"))
        return {
            "R_avg": r_avg,
            "R_dev": r_dev,
            "S_n": _mean_std(self.column("switches"))[0],
            "Stall_n": _mean_std(self.column("stall_count"))[0],
            "Stall_avg": _mean_std(self.column("stall_avg"))[0],
            "QoE_avg": qoe_avg,
            "QoE_dev": qoe_dev,
        }

    @property
    def cache_summary(self) -> dict[str, float | None]:
        return {
            "Hit_ratio": self.hit_ratio,
            "Cached_GB": None if self.strategy == Strategy.LEGACY.value else self.cache.cached_bytes / 1e9,
            "Served_GB": self.cache.served_bytes / 1e9,
            "Data_saved_pct": self.data_saved,
        }

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seeds": self.seeds,
            "cache": self.cache_summary,
            "cache_counts": asdict(self.cache),
            "players": self.player_summary,
            "per_player": [asdict(p) for p in self.players],
        }


def player_rows(traces: Sequence[PlayerTrace], ladder: Sequence[Representation],
                qoe_cfg: QoEConfig | None = None, seed: int = 0) -> list[PlayerRow]:
    rows = []
    for tr in traces:
        m: PlayerMetrics = player_metrics(tr)
        rows.append(PlayerRow(tr.player_id, seed, m.r_avg, m.bitrate_std, m.switches, m.stall_count,
                              m.stall_avg, m.stall_total, qoe_score(tr, ladder, qoe_cfg)))
    return rows


def aggregate_reports(rows: Sequence[PlayerRow], stats: CacheStats, strategy: Strategy | str,
                      seeds: Sequence[int] = ()) -> StrategyReport:
    if not rows:
        raise ValueError("cannot aggregate zero players")
    return StrategyReport(Strategy.parse(strategy).value, list(seeds), stats, list(rows))


def pool(reports: Sequence[StrategyReport]) -> StrategyReport:
    """Merge per-seed reports of one strategy: summed cache counts, all players pooled."""
    stats = CacheStats()
    rows: list[PlayerRow] = []
    seeds: list[int] = []
    for r in reports:
        stats = stats.merged(r.cache)
        rows.extend(r.players)
        seeds.extend(r.seeds)
    return StrategyReport(reports[0].strategy, seeds, stats, rows)


def _cell(v: float | None, fmt: str) -> str:
    return "n/a" if v is None else format(v, fmt)


def format_tables(reports: Sequence[StrategyReport]) -> str:
    lines = ["Cache proxy performance", f"{'Strategy':<12}{'Hit_ratio':>11}{'Cached GB':>11}{'Served GB':>11}{'Saved %':>10}"]
    for r in reports:
        c = r.cache_summary
        lines.append(f"{r.strategy:<12}{_cell(c['Hit_ratio'], '.3f'):>11}{_cell(c['Cached_GB'], '.3f'):>11}"
                     f"{_cell(c['Served_GB'], '.3f'):>11}{_cell(c['Data_saved_pct'], '.2f'):>10}")
    lines += ["", "Player performance",
              f"{'Strategy':<12}{'R_avg':>8}{'S_n':>8}{'Stall_n':>9}{'Stall_avg':>11}{'QoE_avg':>9}{'QoE_dev':>9}"]
    for r in reports:
        p = r.player_summary
        lines.append(f"{r.strategy:<12}{p['R_avg']:>8.2f}{p['S_n']:>8.2f}{p['Stall_n']:>9.2f}"
                     f"{p['Stall_avg']:>11.2f}{p['QoE_avg']:>9.2f}{p['QoE_dev']:>9.2f}")
    return "\n".join(lines) + "\n"


PLAYER_CSV_HEADER = ["strategy", "seed", "player_id", "r_avg_mbps", "bitrate_std_mbps", "switches",
                     "stall_count", "stall_avg_s", "stall_total_s", "qoe"]


def write_player_csv(reports: Sequence[StrategyReport], path: Path, preamble: str | None = None) -> None:
    """Per-player rows (mean and deviation of selected bitrate, stalls, QoE) for plotting."""
    with open(path, "w", newline="") as fh:
        if preamble:
            fh.write(f"# {preamble}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAYER_CSV_HEADER)
        for r in reports:
            for p in r.players:
                w.writerow([r.strategy, p.seed, p.player_id, repr(p.r_avg), repr(p.bitrate_std), p.switches,
                            p.stall_count, repr(p.stall_avg), repr(p.stall_total), repr(p.qoe)])
