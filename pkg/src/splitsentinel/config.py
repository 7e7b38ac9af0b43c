"""Run configuration: defaults, overridden by a JSON file, overridden by flags."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .autoencoder import AEConfig
from .errors import ConfigError

OUT_ENV = "SPLITSENTINEL_OUT"

AE_FIELDS = {f.name for f in fields(AEConfig)}


@dataclass
class RunConfig:
    ae: AEConfig = field(default_factory=AEConfig)
    nslkdd: str | None = None
    train: str | None = None
    test: str | None = None
    labels: str | None = None
    ratios: list = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.5])
    seeds: list = field(default_factory=lambda: [0])
    random_k: int | None = 8
    random_seeds: list = field(default_factory=list)
    jobs: int = 1
    out: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "splitsentinel_out"))

    @classmethod
    def from_mapping(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        ae_doc = dict(doc.pop("ae", {}))
        for key in list(doc):
            if key in AE_FIELDS:
                ae_doc[key] = doc.pop(key)
        known = {f.name for f in fields(cls)} - {"ae"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            ae_cfg = AEConfig(**ae_doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cls(ae=ae_cfg, **doc)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        doc = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file {path} does not exist")
            doc = json.loads(path.read_text())
        for key, value in (overrides or {}).items():
            if value is not None:
                doc[key] = value
        cfg = cls.from_mapping(doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("nslkdd", "train", "test", "labels"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name} path {value} does not exist")
        if self.nslkdd is None and not (self.train and self.test and self.labels):
            raise ConfigError("config needs either 'nslkdd' or all of 'train', 'test', 'labels'")
        if any(r < 0 for r in self.ratios):
            raise ConfigError("threshold ratios must be >= 0")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ae"] = self.ae.to_dict()
        return d
