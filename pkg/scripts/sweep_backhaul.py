#!/usr/bin/env python3
"""Sweep origin latency and arrival spacing, reporting the pooled strategy metrics.

Used to pick the shipped backhaul and arrival defaults, which have no
published values. Each grid point regenerates the dataset and retrains the
forest, because the legacy sessions the classifier learns from change too.

    python scripts/sweep_backhaul.py --rtt 0.03 0.5 0.75 1.0 --gap 1 2 --seeds 1..3
"""

import argparse
import csv
import sys

from edgeprefetch.config import load_config
from edgeprefetch.forecast import Dataset, TrainingError, evaluate, train
from edgeprefetch.pipeline import compare, generate_records, parse_seeds, split_dataset

FIELDS = ["rtt", "gap_unit", "capacity", "rf_acc", "baseline",
          "hit_E", "hit_P", "saved_E", "saved_P", "R_L", "R_E", "R_P", "QoE_L", "QoE_E", "QoE_P"]


def point(cfg, seeds):
    ds = Dataset.from_records(generate_records(cfg, cfg.dataset.seeds))
    tr, te = split_dataset(ds, cfg.dataset.test_fraction, cfg.dataset.split_seed)
    model = train(tr, "rf", cfg.forecast.params)
    ev = evaluate(model, te)
    L, E, P = compare(cfg, seeds, model).pooled
    s = {r.strategy: r.player_summary for r in (L, E, P)}
    return {"rf_acc": ev.accuracy, "baseline": ev.majority_baseline,
            "hit_E": E.hit_ratio, "hit_P": P.hit_ratio, "saved_E": E.data_saved, "saved_P": P.data_saved,
            "R_L": s["legacy"]["R_avg"], "R_E": s["preemptive"]["R_avg"], "R_P": s["predictive"]["R_avg"],
            "QoE_L": s["legacy"]["QoE_avg"], "QoE_E": s["preemptive"]["QoE_avg"],
            "QoE_P": s["predictive"]["QoE_avg"]}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="paper_default")
    ap.add_argument("--rtt", type=float, nargs="+", default=[0.03, 0.5, 0.75, 1.0])
    ap.add_argument("--gap", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--capacity", type=float, nargs="+", default=[1000.0])
    ap.add_argument("--seeds", default="1..3")
    args = ap.parse_args()
    base = load_config(args.config)
    seeds = parse_seeds(args.seeds)
    w = csv.DictWriter(sys.stdout, FIELDS, lineterminator="\n")
    w.writeheader()
    for cap in args.capacity:
        for gap in args.gap:
            for rtt in args.rtt:
                cfg = base.with_()
                cfg.network.backhaul.capacity_mbps, cfg.network.backhaul.rtt = cap, rtt
                cfg.players.gap_unit = gap
                row = {"rtt": rtt, "gap_unit": gap, "capacity": cap}
                try:
                    row.update({k: round(v, 4) for k, v in point(cfg, seeds).items()})
                except TrainingError as exc:
                    print(f"# rtt={rtt} gap={gap} cap={cap}: {exc}", file=sys.stderr)
                    continue
                w.writerow(row)
                sys.stdout.flush()


if __name__ == "__main__":
    main()
