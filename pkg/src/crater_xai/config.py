"""Run configuration, reproducibility records, and dataset splits."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError


@dataclass
class DatasetParams:
    n_trajectories: int = 10
    n_frames: int = 50
    area_m: float = 3000.0
    crater_count: int = 3000
    noise_sigma: float = 2.0
    att_sigma_deg: float = 0.5
    start_alt_m: float = 1500.0
    end_alt_m: float = 200.0


@dataclass
class DetectorParams:
    freeze_epochs: int = 2
    epochs: int = 20
    lr: float = 1e-4
    batch_size: int = 8


@dataclass
class NavigatorParams:
    coarse_epochs: int = 10
    fine_epochs: int = 20
    lr: float = 1e-4
    seq_len: int = 16
    batch_size: int = 8
    lr_cycles: int = 5
    kappa: float = 100.0


@dataclass
class RunConfig:
    seed: int = 0
    tiny: bool = False
    dataset: DatasetParams = field(default_factory=DatasetParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    navigator: NavigatorParams = field(default_factory=NavigatorParams)

    @classmethod
    def load(cls, path=None, overrides: dict = None) -> "RunConfig":
        """Build from an optional YAML file plus CLI overrides."""
        data = {}
        if path is not None:
            try:
                data = yaml.safe_load(Path(path).read_text()) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls._from_dict(data)
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            obj = cfg
            *parents, leaf = key.split(".")
            for p in parents:
                obj = getattr(obj, p)
            if not hasattr(obj, leaf):
                raise ConfigError(f"unknown config key: {key}")
            setattr(obj, leaf, value)
        cfg.validate()
        return cfg

    @classmethod
    def _from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        known = {"seed", "tiny", "dataset", "detector", "navigator"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")

        def build(klass, section):
            payload = data.get(section, {}) or {}
            valid = {f.name for f in klass.__dataclass_fields__.values()}  # type: ignore[attr-defined]
            bad = set(payload) - valid
            if bad:
                raise ConfigError(f"unknown keys in '{section}': {sorted(bad)}")
            try:
                return klass(**payload)
            except TypeError as exc:
                raise ConfigError(f"bad '{section}' section: {exc}") from exc

        return cls(
            seed=int(data.get("seed", 0)),
            tiny=bool(data.get("tiny", False)),
            dataset=build(DatasetParams, "dataset"),
            detector=build(DetectorParams, "detector"),
            navigator=build(NavigatorParams, "navigator"),
        )

    def validate(self):
        d = self.dataset
        if d.n_trajectories < 1 or d.n_frames < 2:
            raise ConfigError("dataset needs >=1 trajectories of >=2 frames")
        if not (d.start_alt_m > d.end_alt_m > 0):
            raise ConfigError("need start_alt_m > end_alt_m > 0")
        if self.detector.epochs < 0 or self.detector.freeze_epochs < 0:
            raise ConfigError("detector epochs must be nonnegative")
        if self.detector.lr <= 0 or self.navigator.lr <= 0:
            raise ConfigError("learning rates must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunRecord:
    command: str
    config_hash: str
    input_hashes: dict
    started: float
    finished: float = 0.0
    artifacts: list = field(default_factory=list)

    def write(self, path):
        self.finished = time.time()
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True))


def split_indices(n: int, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle split; remainder items go to the first bucket."""
    order = np.random.default_rng(seed).permutation(n)
    sizes = [int(n * f) for f in fractions]
    sizes[0] += n - sum(sizes)
    out = []
    start = 0
    for s in sizes:
        out.append(sorted(int(i) for i in order[start : start + s]))
        start += s
    return out
