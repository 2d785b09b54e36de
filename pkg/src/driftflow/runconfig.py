"""JSON run configuration: one document holding everything that affects the math."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .driftfield import DriftConfig
from .kernelops import KernelSpec
from .netcore import TimeEmbedSpec
from .synthdata import DatasetSpec, SourceSpec
from .timepath import TimeSamplerSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    source: SourceSpec = field(default_factory=SourceSpec)
    nfe: tuple = (1, 2, 5, 10, 20, 50)
    output_dir: str = "run"

    def to_dict(self):
        t = self.train
        return {
            "schema_version": SCHEMA_VERSION,
            "method": t.method,
            "G": t.G,
            "B": t.B,
            "steps": t.steps,
            "lr": t.lr,
            "beta1": t.beta1,
            "beta2": t.beta2,
            "eps": t.eps,
            "seed": t.seed,
            "conditional": t.conditional,
            "hidden": t.hidden,
            "parameterization": t.parameterization,
            "kernel": asdict(t.drift.kernel),
            "sinkhorn_iters": t.drift.sinkhorn_iters,
            "time_sampler": asdict(t.time_sampler),
            "embed": asdict(t.embed),
            "dataset": asdict(self.dataset),
            "source": asdict(self.source),
            "nfe": list(self.nfe),
            "output_dir": self.output_dir,
        }


_TOP_KEYS = {"schema_version", "method", "G", "B", "steps", "lr", "beta1", "beta2", "eps", "seed",
             "conditional", "hidden", "parameterization", "kernel", "sinkhorn_iters", "time_sampler",
             "embed", "dataset", "source", "nfe", "output_dir"}


def _sub(doc, key, cls):
    raw = doc.get(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected an object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{key}: unknown keys {unknown}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")
    kernel = _sub(doc, "kernel", KernelSpec)
    scalars = {k: doc[k] for k in ("method", "G", "B", "steps", "lr", "beta1", "beta2", "eps", "seed",
                                   "conditional", "hidden", "parameterization") if k in doc}
    for k in ("G", "B", "steps", "seed", "hidden"):
        if k in scalars and (not isinstance(scalars[k], int) or isinstance(scalars[k], bool)):
            raise ConfigError(f"{k}: expected an integer, got {scalars[k]!r}")
    try:
        drift = DriftConfig(kernel, doc.get("sinkhorn_iters", 1))
        train = TrainConfig(drift=drift, time_sampler=_sub(doc, "time_sampler", TimeSamplerSpec),
                            embed=_sub(doc, "embed", TimeEmbedSpec), **scalars)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    nfe = doc.get("nfe", list(RunConfig.nfe))
    if not isinstance(nfe, list) or not nfe or not all(isinstance(n, int) and n >= 1 for n in nfe):
        raise ConfigError("nfe: expected a non-empty list of positive integers")
    out = doc.get("output_dir", RunConfig.output_dir)
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a non-empty string")
    return RunConfig(train, _sub(doc, "dataset", DatasetSpec), _sub(doc, "source", SourceSpec), tuple(nfe), out)


def config_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def load_config(path):
    """Return ``(RunConfig, sha256 of the file bytes)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc), config_hash(raw)
