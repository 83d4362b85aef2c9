#!/usr/bin/env python3
"""Full comparison protocol on one scenario: dataset, classifiers, three strategies.

    python scripts/reproduce_tables.py --out results/tables [--config my.yaml] [--seeds 1..5]

Writes the dataset, model files, evaluation outputs for every classifier
kind and the strategy comparison report into ``--out``.
"""

import argparse
import json
from pathlib import Path

from edgeprefetch.config import load_config
from edgeprefetch.forecast import write_dataset_csv
from edgeprefetch.forecast.persist import load_model, save_model
from edgeprefetch.metrics import format_tables
from edgeprefetch.pipeline import compare, evaluate_on_file, generate_records, parse_seeds, train_on_file


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="paper_default")
    ap.add_argument("--seeds", default="1..5")
    ap.add_argument("--out", default="results/tables")
    args = ap.parse_args()

    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds_path = out / "dataset.csv"
    n = write_dataset_csv(generate_records(cfg, cfg.dataset.seeds), ds_path)
    print(f"dataset: {n} records from seeds {cfg.dataset.seeds}")

    accuracy = {}
    for kind in ("rf", "knn", "lda"):
        params = cfg.forecast.params if kind == cfg.forecast.model else {}
        outcome = train_on_file(ds_path, kind, params, 0, cfg.dataset.split_seed, cfg.dataset.test_fraction)
        save_model(outcome.model, out / f"model_{kind}.json")
        ev = evaluate_on_file(ds_path, out / f"model_{kind}.json", out / f"eval_{kind}")
        accuracy[kind] = ev.accuracy
        print(f"{kind:>4}: accuracy {ev.accuracy:.4f} (baseline {ev.majority_baseline:.4f}, "
              f"gate {'met' if ev.passes_gate else 'missed'})")
    (out / "classifiers.json").write_text(json.dumps(accuracy, indent=2) + "\n")

    model = load_model(out / f"model_{cfg.forecast.model}.json")
    result = compare(cfg, parse_seeds(args.seeds), model, out_root=out)
    print(format_tables(result.pooled), end="")
    print(f"report: {result.out}")


if __name__ == "__main__":
    main()
