"""Scenario configuration: YAML schema, validation and hashing."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from edgeprefetch.forecast.models import DEFAULT_PARAMS
from edgeprefetch.media import DEFAULT_LADDER, Manifest, Representation
from edgeprefetch.metrics import QoEConfig
from edgeprefetch.network import LinkSpec, load_trace_csv
from edgeprefetch.player import PlayerConfig


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass
class RepresentationConfig:
    index: int
    bitrate: float
    resolution: str
    codec: str = "HEVC"
    framerate: float = 24.0


def _default_ladder() -> list[RepresentationConfig]:
    return [RepresentationConfig(r.index, r.bitrate, r.resolution, r.codec, r.framerate) for r in DEFAULT_LADDER]


@dataclass
class MediaConfig:
    segment_duration: float = 4.0
    total_duration: float = 322.0
    jitter: float = 0.15
    size_seed: int = 0
    ladder: list[RepresentationConfig] = field(default_factory=_default_ladder)


@dataclass
class LinkConfig:
    capacity_mbps: float = 100.0
    rtt: float = 0.0
    trace: str | None = None


@dataclass
class NetworkConfig:
    radio: LinkConfig = field(default_factory=lambda: LinkConfig(250.0, 0.02))
    backhaul: LinkConfig = field(default_factory=lambda: LinkConfig(1000.0, 0.75))


@dataclass
class CacheConfig:
    ttl: float | None = None  # None: two segment durations


@dataclass
class ForecastConfig:
    model: str = "rf"
    params: dict = field(default_factory=dict)
    model_path: str | None = None
    query_latency: float = 0.0
    ewma_alpha: float = 0.3


@dataclass
class DatasetConfig:
    seeds: list[int] = field(default_factory=lambda: [101, 102, 103, 104, 105])
    split_seed: int = 0
    test_fraction: float = 0.2


@dataclass
class ScenarioConfig:
    name: str = "custom"
    seed: int = 1
    strategy: str = "legacy"
    media: MediaConfig = field(default_factory=MediaConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    players: PlayerConfig = field(default_factory=PlayerConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    qoe: QoEConfig = field(default_factory=QoEConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    base_dir: str = field(default=".", compare=False, repr=False)

    # ---- derived objects

    def manifest(self) -> Manifest:
        ladder = []
        for r in self.media.ladder:
            w, h = (int(v) for v in r.resolution.lower().split("x"))
            ladder.append(Representation(r.index, float(r.bitrate), w, h, r.codec, float(r.framerate)))
        # jitter is keyed to the content, not the run seed, so sizes stay fixed across runs
        return Manifest(tuple(ladder), self.media.segment_duration, self.media.total_duration,
                        self.media.jitter, seed=self.media.size_seed)

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def link_spec(self, which: str) -> LinkSpec:
        lc: LinkConfig = getattr(self.network, which)
        if lc.trace:
            return LinkSpec(load_trace_csv(self._resolve(lc.trace)), lc.rtt)
        return LinkSpec(float(lc.capacity_mbps), lc.rtt)

    @property
    def ttl(self) -> float:
        return 2 * self.media.segment_duration if self.cache.ttl is None else self.cache.ttl

    def model_path(self) -> Path | None:
        return self._resolve(self.forecast.model_path) if self.forecast.model_path else None

    # ---- validation / identity

    def errors(self) -> list[str]:
        errs: list[str] = []
        try:
            self.manifest()
        except (ValueError, TypeError) as exc:
            errs.append(f"media.{exc}" if not str(exc).startswith("media") else str(exc))
        if self.seed < 0:
            errs.append("seed: must be non-negative")
        if self.strategy not in ("legacy", "preemptive", "predictive"):
            errs.append(f"strategy: unknown value {self.strategy!r}")
        for which in ("radio", "backhaul"):
            lc: LinkConfig = getattr(self.network, which)
            if lc.trace:
                if not self._resolve(lc.trace).exists():
                    errs.append(f"network.{which}.trace: file not found: {lc.trace}")
                else:
                    try:
                        self.link_spec(which)
                    except ValueError as exc:
                        errs.append(f"network.{which}.trace: {exc}")
            elif not lc.capacity_mbps > 0:
                errs.append(f"network.{which}.capacity_mbps: must be positive")
            if lc.rtt < 0:
                errs.append(f"network.{which}.rtt: must be non-negative")
        errs += self.players.errors(self.media.segment_duration)
        if self.cache.ttl is not None and self.cache.ttl <= 0:
            errs.append("cache.ttl: must be positive")
        if self.forecast.model not in DEFAULT_PARAMS:
            errs.append(f"forecast.model: unknown kind {self.forecast.model!r}")
        if self.forecast.query_latency < 0:
            errs.append("forecast.query_latency: must be non-negative")
        if not 0 < self.forecast.ewma_alpha <= 1:
            errs.append("forecast.ewma_alpha: must lie in (0, 1]")
        if self.forecast.model_path and not self._resolve(self.forecast.model_path).exists():
            errs.append(f"forecast.model_path: file not found: {self.forecast.model_path}")
        errs += self.qoe.errors()
        if not 0 < self.dataset.test_fraction < 1:
            errs.append("dataset.test_fraction: must lie in (0, 1)")
        if not self.dataset.seeds:
            errs.append("dataset.seeds: need at least one seed")
        return errs

    def validate(self) -> "ScenarioConfig":
        errs = self.errors()
        if errs:
            raise ConfigError(errs)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def hash(self) -> str:
        """Digest of the run-defining fields (seed and strategy excluded; they are reported alongside)."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("strategy")
        d.pop("name")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def with_(self, **changes: Any) -> "ScenarioConfig":
        new = copy.deepcopy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        return new

    def dump_yaml(self, path: Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _build(cls, data: Any, where: str, errs: list[str]):
    if not isinstance(data, dict):
        errs.append(f"{where}: expected a mapping")
        return cls()
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields or key == "base_dir":
            errs.append(f"{where}.{key}: unknown field" if where else f"{key}: unknown field")
            continue
        sub = _NESTED.get((cls, key))
        name = f"{where}.{key}" if where else key
        if sub is list:
            if not isinstance(value, list):
                errs.append(f"{name}: expected a list")
                continue
            kwargs[key] = [_build(RepresentationConfig, v, f"{name}[{i}]", errs) for i, v in enumerate(value)]
        elif sub is not None:
            kwargs[key] = _build(sub, value, name, errs)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        errs.append(f"{where}: {exc}")
        return cls() if cls is not RepresentationConfig else RepresentationConfig(0, 0.0, "0x0")


_NESTED = {
    (ScenarioConfig, "media"): MediaConfig,
    (ScenarioConfig, "network"): NetworkConfig,
    (ScenarioConfig, "players"): PlayerConfig,
    (ScenarioConfig, "cache"): CacheConfig,
    (ScenarioConfig, "forecast"): ForecastConfig,
    (ScenarioConfig, "qoe"): QoEConfig,
    (ScenarioConfig, "dataset"): DatasetConfig,
    (NetworkConfig, "radio"): LinkConfig,
    (NetworkConfig, "backhaul"): LinkConfig,
    (MediaConfig, "ladder"): list,
}


def config_from_dict(data: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    errs: list[str] = []
    cfg = _build(ScenarioConfig, data or {}, "", errs)
    cfg.base_dir = str(base_dir)
    if errs:
        raise ConfigError(errs)
    try:
        return cfg.validate()
    except TypeError as exc:  # wrong scalar types, e.g. strings where numbers belong
        raise ConfigError([f"type error: {exc}"]) from None


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Load a scenario file; ``None`` or ``"paper_default"`` gives the shipped profile."""
    if path is None or str(path) == "paper_default":
        text = resources.files("edgeprefetch.configs").joinpath("paper_default.yaml").read_text()
        return config_from_dict(yaml.safe_load(text))
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config: file not found: {path}"])
    return config_from_dict(yaml.safe_load(path.read_text()), base_dir=path.parent)
