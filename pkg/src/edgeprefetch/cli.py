"""Command-line front end: ``edgeprefetch <simulate|gen-dataset|train|evaluate|compare>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from edgeprefetch import pipeline
from edgeprefetch.cache import Strategy
from edgeprefetch.config import ConfigError, ScenarioConfig, load_config
from edgeprefetch.forecast import ACCURACY_GATE, MODEL_KINDS, TrainingError, write_dataset_csv
from edgeprefetch.forecast.persist import ModelFileError, load_model, save_model
from edgeprefetch.metrics import format_tables


class UsageError(Exception):
    pass


def _config(args) -> ScenarioConfig:
    return load_config(args.config)


def _seeds(args, fallback: list[int]) -> list[int]:
    text = getattr(args, "seeds", None)
    if text is None and getattr(args, "seed", None) is not None:
        text = str(args.seed)
    if text is None:
        return list(fallback)
    try:
        return pipeline.parse_seeds(text)
    except ValueError as exc:
        raise UsageError(f"--seeds: {exc}") from None


def _model(path: str | None, cfg: ScenarioConfig):
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"--model: file not found: {p}")
        return load_model(p)
    cfg_path = cfg.model_path()
    return load_model(cfg_path) if cfg_path is not None else None


def _gate(acc: float) -> str:
    verdict = "PASS" if acc >= ACCURACY_GATE else "FAIL"
    return f"accuracy {acc:.4f} -> gate {ACCURACY_GATE:.2f}: {verdict}"


def cmd_simulate(args) -> int:
    cfg = _config(args)
    strategy = Strategy.parse(args.strategy or cfg.strategy)
    model = None
    if strategy is Strategy.PREDICTIVE and not args.oracle:
        model = _model(args.model, cfg)
        if model is None:
            raise UsageError("predictive strategy needs --model <file> (or --oracle for the perfect predictor)")
    seeds = _seeds(args, [cfg.seed])
    for seed in seeds:
        out, report = pipeline.run_simulation(cfg, strategy, seed, Path(args.out), model, args.oracle)
        p = report.player_summary
        hr = report.hit_ratio
        print(f"{strategy.value} seed={seed}: hit_ratio={'n/a' if hr is None else f'{hr:.3f}'} "
              f"R_avg={p['R_avg']:.2f} QoE_avg={p['QoE_avg']:.2f} -> {out}")
    return 0


def cmd_gen_dataset(args) -> int:
    cfg = _config(args)
    seeds = _seeds(args, cfg.dataset.seeds)
    records = pipeline.generate_records(cfg, seeds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_dataset_csv(records, out)
    print(f"wrote {n} records from {len(seeds)} legacy runs (config {cfg.hash()}) -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    kind = (args.model_kind or cfg.forecast.model).lower()
    params = cfg.forecast.params if kind == cfg.forecast.model else {}
    split_seed = cfg.dataset.split_seed if args.split_seed is None else args.split_seed
    outcome = pipeline.train_on_file(Path(args.dataset), kind, params, args.seed, split_seed,
                                     cfg.dataset.test_fraction)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(outcome.model, out)
    ev = outcome.evaluation
    print(f"trained {kind} on {outcome.model.meta['n_train']} records -> {out}")
    print(f"held-out n={ev.n_test} majority baseline {ev.majority_baseline:.4f}")
    print(_gate(ev.accuracy))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if args.model is None:
        raise UsageError("evaluate needs --model <file>")
    model_path = Path(args.model)
    if not model_path.exists():
        raise UsageError(f"--model: file not found: {model_path}")
    out = Path(args.out)
    ev = pipeline.evaluate_on_file(Path(args.dataset), model_path, out, args.split_seed,
                                   cfg.dataset.test_fraction if args.split_seed is not None else None)
    print(f"{ev.kind}: n_test={ev.n_test} majority baseline {ev.majority_baseline:.4f}")
    print(_gate(ev.accuracy))
    print(f"wrote evaluation.json, confusion.csv, confusion_normalized.csv, correlation.csv -> {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    model = None if args.oracle else _model(args.model, cfg)
    if model is None and not args.oracle:
        raise UsageError("compare needs --model <file> for the predictive strategy (or --oracle)")
    seeds = _seeds(args, [cfg.seed])
    result = pipeline.compare(cfg, seeds, model, args.oracle, Path(args.out))
    print(f"seeds {','.join(map(str, seeds))} pooled:")
    print(format_tables(result.pooled), end="")
    print(f"-> {result.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgeprefetch", description="DASH edge-cache prefetching simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default: str):
        p.add_argument("--config", default="paper_default",
                       help="scenario YAML file, or 'paper_default' for the shipped profile")
        p.add_argument("--out", default=out_default)

    def seeds(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--seed", type=int)
        g.add_argument("--seeds", help="comma list or inclusive range, e.g. 1..5")

    p = sub.add_parser("simulate", help="run one strategy and write all run artifacts")
    common(p, "runs")
    seeds(p)
    p.add_argument("--strategy", help=", ".join(s.value for s in Strategy))
    p.add_argument("--model", help="trained model file (predictive strategy)")
    p.add_argument("--oracle", action="store_true", help="prefetch the exact next request (test hook)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-dataset", help="session records from legacy runs")
    common(p, "dataset.csv")
    seeds(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="fit a classifier on the training split")
    common(p, "model.json")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", dest="model_kind", help=", ".join(MODEL_KINDS))
    p.add_argument("--seed", type=int, default=0, help="training seed (bootstrap draws)")
    p.add_argument("--split-seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="held-out accuracy, confusion and correlation matrices")
    common(p, "evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--split-seed", type=int, help="defaults to the split stored with the model")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="all three strategies on identical seeds")
    common(p, "runs")
    seeds(p)
    p.add_argument("--model", help="trained model file")
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("error: invalid configuration", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except NotImplementedError as exc:
        print(f"error: not implemented: {exc}", file=sys.stderr)
        return 3
    except (UsageError, TrainingError, ModelFileError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
