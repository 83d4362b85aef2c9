import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeprefetch.cache import CacheStats
from edgeprefetch.media import DEFAULT_LADDER
from edgeprefetch.metrics import (
    PlayerRow,
    QoEConfig,
    aggregate_reports,
    format_tables,
    player_rows,
    pool,
    qoe_score,
    write_player_csv,
)
from edgeprefetch.player import PlayerTrace, SegmentRecord, StallEvent, player_metrics
from edgeprefetch.simulation import simulate


def _trace(reps, stalls=()):
    tr = PlayerTrace(0, 0.0)
    for i, r in enumerate(reps, start=1):
        tr.records.append(SegmentRecord(i, r, DEFAULT_LADDER[r - 1].bitrate, 1, 0.0, 0.0))
    tr.stalls = [StallEvent(float(i), d) for i, d in enumerate(stalls)]
    tr.end_time = 0.0
    return tr


def test_boundary_scores():
    assert qoe_score(_trace([6] * 81), DEFAULT_LADDER) == 5.0
    assert qoe_score(_trace([1] * 81), DEFAULT_LADDER) == 1.0


def test_stall_penalty_arithmetic():
    # one stall of 2 s: 0.5 + 0.05 * 2 = 0.6
    assert qoe_score(_trace([6] * 81, [2.0]), DEFAULT_LADDER) == pytest.approx(4.4)
    # the cap applies: 10 stalls cost 1.5, not 5+
    assert qoe_score(_trace([6] * 81, [1.0] * 10), DEFAULT_LADDER) == pytest.approx(3.5)


def test_switch_penalty_is_capped():
    reps = [5, 6] * 40 + [6]
    q = np.mean([np.log(DEFAULT_LADDER[r - 1].bitrate / 0.5) / np.log(55) for r in reps])
    assert qoe_score(_trace(reps), DEFAULT_LADDER) == pytest.approx(min(5.0, 1 + 4 * q - 0.5))


def test_empty_trace_is_an_error():
    with pytest.raises(ValueError):
        qoe_score(PlayerTrace(0, 0.0), DEFAULT_LADDER)


traces = st.tuples(
    st.lists(st.integers(1, 6), min_size=1, max_size=81),
    st.lists(st.floats(0.01, 30.0), max_size=8),
)


@settings(max_examples=1000)
@given(traces, st.floats(0.01, 30.0))
def test_bounds_and_stall_monotonicity(trace, extra):
    reps, stalls = trace
    base = qoe_score(_trace(reps, stalls), DEFAULT_LADDER)
    assert 1.0 <= base <= 5.0
    assert qoe_score(_trace(reps, stalls + [extra]), DEFAULT_LADDER) <= base


@settings(max_examples=1000)
@given(traces, st.data())
def test_raising_quality_never_lowers_score(trace, data):
    reps, stalls = trace
    # lift one whole run of equal reps: stalls are untouched and no new switch appears
    start = data.draw(st.integers(0, len(reps) - 1))
    while start > 0 and reps[start - 1] == reps[start]:
        start -= 1
    end = start
    while end + 1 < len(reps) and reps[end + 1] == reps[start]:
        end += 1
    new_rep = data.draw(st.integers(reps[start], 6))
    lifted = reps[:start] + [new_rep] * (end - start + 1) + reps[end + 1:]
    before, after = _trace(reps, stalls), _trace(lifted, stalls)
    assert player_metrics(after).switches <= player_metrics(before).switches
    assert qoe_score(after, DEFAULT_LADDER) >= qoe_score(before, DEFAULT_LADDER)


def _row(pid, qoe, r_avg=5.0):
    return PlayerRow(pid, 1, r_avg, 0.0, 0, 0, 0.0, 0.0, qoe)


def test_aggregate_sample_deviation():
    rep = aggregate_reports([_row(0, 4.0), _row(1, 4.0), _row(2, 5.0)], CacheStats(requests=1), "legacy")
    s = rep.player_summary
    assert s["QoE_avg"] == pytest.approx(4.333, abs=1e-3)
    assert s["QoE_dev"] == pytest.approx(0.577, abs=1e-3)


def test_single_player_has_zero_deviation():
    s = aggregate_reports([_row(0, 3.2)], CacheStats(), "legacy").player_summary
    assert s["QoE_dev"] == 0.0 and s["R_dev"] == 0.0


def test_zero_players_is_an_error():
    with pytest.raises(ValueError):
        aggregate_reports([], CacheStats(), "legacy")


def test_legacy_cache_cells_are_not_applicable():
    rep = aggregate_reports([_row(0, 3.0)], CacheStats(requests=4, served_bytes=10), "legacy")
    assert rep.hit_ratio is None and rep.data_saved is None
    assert "n/a" in format_tables([rep]).splitlines()[2]


def test_pool_sums_counts_and_concatenates_players():
    a = aggregate_reports([_row(0, 3.0)], CacheStats(requests=2, hits=1, served_bytes=10, cached_bytes=4), "predictive", [1])
    b = aggregate_reports([_row(0, 5.0)], CacheStats(requests=2, hits=2, served_bytes=10, cached_bytes=2), "predictive", [2])
    p = pool([a, b])
    assert p.hit_ratio == 0.75 and p.data_saved == pytest.approx(70.0)
    assert p.seeds == [1, 2] and p.player_summary["QoE_avg"] == 4.0


def test_report_recomputable_from_player_csv(tmp_path, small_cfg):
    res = simulate(small_cfg, "preemptive", 4)
    rows = player_rows(res.traces, small_cfg.manifest().ladder, small_cfg.qoe, seed=4)
    rep = aggregate_reports(rows, res.stats, "preemptive", [4])
    path = tmp_path / "players.csv"
    write_player_csv([rep], path, "config_hash=x seed=4")
    with open(path) as fh:
        data = list(csv.DictReader(l for l in fh if not l.startswith("#")))
    r_avg = [float(d["r_avg_mbps"]) for d in data]
    qoe = [float(d["qoe"]) for d in data]
    s = rep.player_summary
    assert np.mean(r_avg) == s["R_avg"]
    assert np.mean(qoe) == s["QoE_avg"] and np.std(qoe, ddof=1) == s["QoE_dev"]


def test_qoe_config_validation():
    assert QoEConfig(stall_cap=-1).errors() == ["qoe.stall_cap: must be non-negative"]
