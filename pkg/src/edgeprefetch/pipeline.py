"""Experiment orchestration: single runs, dataset generation, training, evaluation, comparison.

Every artifact writer stamps the config hash and seed into its output so a
file can always be traced back to the run that produced it.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from edgeprefetch.cache import Strategy
from edgeprefetch.config import ScenarioConfig
from edgeprefetch.forecast import (
    Dataset,
    Evaluation,
    SessionRecord,
    TrainedModel,
    correlation_matrix,
    evaluate,
    stratified_split,
    train,
    write_dataset_csv,
)
from edgeprefetch.forecast.evaluation import write_correlation_csv, write_evaluation
from edgeprefetch.forecast.features import read_dataset_csv
from edgeprefetch.forecast.persist import load_model, save_model
from edgeprefetch.metrics import (
    StrategyReport,
    aggregate_reports,
    format_tables,
    player_rows,
    pool,
    write_player_csv,
)
from edgeprefetch.player import write_stalls_csv, write_traces_csv
from edgeprefetch.simulation import RunResult, simulate

STRATEGIES = (Strategy.LEGACY, Strategy.PREEMPTIVE, Strategy.PREDICTIVE)


def parse_seeds(text: str) -> list[int]:
    """Accepts ``"3"``, ``"1,2,5"`` or an inclusive range ``"1..5"``."""
    seeds: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = (int(v) for v in part.split("..", 1))
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    if any(s < 0 for s in seeds):
        raise ValueError("seeds must be non-negative")
    return seeds


def timestamp() -> str:
    return _dt.datetime.now().strftime("%Y%m%dT%H%M%S")


def _preamble(cfg_hash: str, seed: int | str, strategy: str) -> str:
    return f"config_hash={cfg_hash} seed={seed} strategy={strategy}"


def _unique_dir(path: Path) -> Path:
    out, n = path, 1
    while out.exists():
        n += 1
        out = path.with_name(f"{path.name}-{n}")
    out.mkdir(parents=True)
    return out


def report_for(result: RunResult, cfg: ScenarioConfig) -> StrategyReport:
    rows = player_rows(result.traces, cfg.manifest().ladder, cfg.qoe, seed=result.seed)
    return aggregate_reports(rows, result.stats, result.strategy, [result.seed])


def _write_reports(reports: Sequence[StrategyReport], out: Path, header: dict) -> None:
    doc = dict(header)
    doc["reports"] = [r.to_dict() for r in reports]
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    lines = [f"# {k}={v}" for k, v in header.items()]
    (out / "report.txt").write_text("\n".join(lines) + "\n\n" + format_tables(reports))


def write_run(result: RunResult, cfg: ScenarioConfig, out: Path) -> StrategyReport:
    """Write one run's artifacts into an existing directory ``out``."""
    pre = _preamble(result.config_hash, result.seed, result.strategy.value)
    cfg.with_(seed=result.seed, strategy=result.strategy.value).dump_yaml(out / "config.yaml")
    result.log.write_csv(out / "events.csv", pre)
    write_traces_csv(result.traces, out / "traces.csv", pre)
    write_stalls_csv(result.traces, out / "stalls.csv", pre)
    write_dataset_csv(result.records, out / "dataset.csv")
    report = report_for(result, cfg)
    write_player_csv([report], out / "players.csv", pre)
    _write_reports([report], out, {"config_hash": result.config_hash, "seed": result.seed,
                                   "strategy": result.strategy.value})
    return report


def run_dir_name(strategy: str, seed: int, cfg_hash: str, stamp: str | None = None) -> str:
    return f"{stamp or timestamp()}_{strategy}_s{seed}_{cfg_hash[:8]}"


def run_simulation(cfg: ScenarioConfig, strategy: Strategy | str, seed: int, out_root: Path,
                   model: TrainedModel | None = None, oracle: bool = False,
                   stamp: str | None = None) -> tuple[Path, StrategyReport]:
    strategy = Strategy.parse(strategy)
    result = simulate(cfg, strategy, seed, model=model, oracle=oracle)
    out = _unique_dir(Path(out_root) / run_dir_name(strategy.value, seed, result.config_hash, stamp))
    return out, write_run(result, cfg, out)


def generate_records(cfg: ScenarioConfig, seeds: Sequence[int]) -> list[SessionRecord]:
    """Session records from LEGACY runs, so labels are not shaped by any predictor."""
    if not seeds:
        raise ValueError("gen-dataset needs at least one run seed")
    records: list[SessionRecord] = []
    for s in seeds:
        records.extend(simulate(cfg, Strategy.LEGACY, s).records)
    return records


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class TrainOutcome:
    model: TrainedModel
    evaluation: Evaluation


def split_dataset(ds: Dataset, test_fraction: float, split_seed: int) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = stratified_split(ds.y, test_fraction, split_seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def train_on_file(dataset_path: Path, kind: str, params: dict | None, seed: int,
                  split_seed: int, test_fraction: float) -> TrainOutcome:
    ds = read_dataset_csv(dataset_path)
    tr, te = split_dataset(ds, test_fraction, split_seed)
    model = train(tr, kind, params, seed)
    hashes = sorted({p[2] for p in ds.provenance if p[2]})
    model.meta.update({
        "dataset_sha256": file_digest(dataset_path),
        "split_seed": split_seed,
        "test_fraction": test_fraction,
        "config_hash": hashes[0] if len(hashes) == 1 else hashes,
    })
    return TrainOutcome(model, evaluate(model, te))


def evaluate_on_file(dataset_path: Path, model_path: Path, out: Path,
                     split_seed: int | None = None, test_fraction: float | None = None) -> Evaluation:
    """Re-create the model's held-out split and write accuracy, confusion and correlation outputs."""
    model = load_model(model_path)
    ds = read_dataset_csv(dataset_path)
    split_seed = model.meta.get("split_seed", 0) if split_seed is None else split_seed
    test_fraction = model.meta.get("test_fraction", 0.2) if test_fraction is None else test_fraction
    _, te = split_dataset(ds, test_fraction, split_seed)
    ev = evaluate(model, te)
    digest = file_digest(dataset_path)
    extra = {"dataset_sha256": digest, "split_seed": split_seed, "test_fraction": test_fraction,
             "config_hash": model.meta.get("config_hash")}
    if model.meta.get("dataset_sha256") not in (None, digest):
        extra["warning"] = "model was trained on a different dataset file; split may overlap training rows"
    write_evaluation(ev, out, extra)
    names, corr = correlation_matrix(ds)
    write_correlation_csv(names, corr, out / "correlation.csv")
    return ev


def save_trained(outcome: TrainOutcome, path: Path) -> None:
    save_model(outcome.model, path)


@dataclass
class Comparison:
    per_seed: dict[int, list[StrategyReport]]
    pooled: list[StrategyReport]
    out: Path | None = None


def compare(cfg: ScenarioConfig, seeds: Sequence[int], model: TrainedModel | None = None,
            oracle: bool = False, out_root: Path | None = None, stamp: str | None = None) -> Comparison:
    """All three strategies on identical seeds; per-seed and pooled reports."""
    if model is None and not oracle:
        raise ValueError("compare needs a trained model (--model) for the predictive strategy")
    cfg_hash = cfg.hash()
    out = None
    if out_root is not None:
        out = _unique_dir(Path(out_root) / f"{stamp or timestamp()}_compare_{cfg_hash[:8]}")
        cfg.dump_yaml(out / "config.yaml")
    per_seed: dict[int, list[StrategyReport]] = {}
    for seed in seeds:
        per_seed[seed] = []
        for strategy in STRATEGIES:
            try:
                result = simulate(cfg, strategy, seed, model=model, oracle=oracle)
            except Exception as exc:
                raise RuntimeError(f"{strategy.value} run with seed {seed} failed: {exc}") from exc
            if out is not None:
                sub = out / strategy.value / f"s{seed}"
                sub.mkdir(parents=True)
                rep = write_run(result, cfg, sub)
            else:
                rep = report_for(result, cfg)
            per_seed[seed].append(rep)
    pooled = [pool([per_seed[s][i] for s in seeds]) for i in range(len(STRATEGIES))]
    if out is not None:
        seed_text = ",".join(str(s) for s in seeds)
        write_player_csv(pooled, out / "players.csv", _preamble(cfg_hash, seed_text, "all"))
        doc = {"config_hash": cfg_hash, "seeds": list(seeds),
               "pooled": [r.to_dict() for r in pooled],
               "per_seed": {str(s): [r.to_dict() for r in reps] for s, reps in per_seed.items()}}
        (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
        parts = [f"# config_hash={cfg_hash} seeds={seed_text}", "", "== pooled ==", format_tables(pooled)]
        for s, reps in per_seed.items():
            parts += [f"== seed {s} ==", format_tables(reps)]
        (out / "report.txt").write_text("\n".join(parts))
    return Comparison(per_seed, pooled, out)


def pooled_means(reports: Sequence[StrategyReport]) -> dict[str, dict]:
    return {r.strategy: {**r.cache_summary, **r.player_summary} for r in reports}


__all__ = [
    "STRATEGIES", "parse_seeds", "write_run", "run_simulation", "generate_records", "train_on_file",
    "evaluate_on_file", "compare", "Comparison", "TrainOutcome", "split_dataset", "pooled_means",
]
