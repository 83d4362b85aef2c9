"""Versioned, self-describing JSON model files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from edgeprefetch.forecast.models import TrainedModel, make_estimator

FORMAT = "edgeprefetch.model"
VERSION = 1


class ModelFileError(ValueError):
    pass


class ModelVersionError(ModelFileError):
    pass


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def save_model(model: TrainedModel, path: str | Path) -> None:
    payload = {
        "kind": model.kind,
        "params": model.params,
        "labels": model.labels.tolist(),
        "feature_names": model.feature_names,
        "mean": None if model.mean is None else model.mean.tolist(),
        "scale": None if model.scale is None else model.scale.tolist(),
        "meta": model.meta,
        "state": model.estimator.state(),
    }
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "sha256": hashlib.sha256(_canonical(payload)).hexdigest(),
        "payload": payload,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"{path}: not a readable model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFileError(f"{path}: not an {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ModelVersionError(f"{path}: unsupported model file version {doc.get('version')!r} "
                                f"(this build reads version {VERSION})")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or hashlib.sha256(_canonical(payload)).hexdigest() != doc.get("sha256"):
        raise ModelFileError(f"{path}: checksum mismatch, file is corrupted")
    p = payload
    est = make_estimator(p["kind"], p["params"], p["meta"].get("seed", 0))
    est.n_classes = len(p["labels"])
    est.load_state(p["state"])
    return TrainedModel(
        kind=p["kind"],
        params=p["params"],
        labels=np.array(p["labels"], dtype=float),
        estimator=est,
        mean=None if p["mean"] is None else np.array(p["mean"], dtype=float),
        scale=None if p["scale"] is None else np.array(p["scale"], dtype=float),
        feature_names=list(p["feature_names"]),
        meta=p["meta"],
    )
