"""ExperimentConfig: one JSON document describing a full run."""
from __future__ import annotations

import copy
import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

from .awp import AwpConfig
from .evaluation import BeamConfig
from .properties import PropertyTransform
from .sampler import SamplerConfig
from .toybench.optim import OptimizerConfig
from .toybench.synth import SynthConfig
from .toybench.train import TrainConfig


@dataclass(frozen=True)
class ModelConfig:
    past_context: int = 8
    future_context: int = 0
    hidden: int = 64


@dataclass(frozen=True)
class DataConfig:
    n_train: int = 300
    n_eval: int = 100


_SECTIONS = {
    "synth": SynthConfig,
    "data": DataConfig,
    "model": ModelConfig,
    "sampler": SamplerConfig,
    "awp": AwpConfig,
    "transform": PropertyTransform,
    "optimizer": OptimizerConfig,
    "train": TrainConfig,
    "eval": BeamConfig,
}


def _jsonable(value):
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Root seed plus one section per component.

    Seeds of the data generator and the sampler default to the root seed,
    so one number fixes every random stream of a run.
    """

    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    awp: AwpConfig = field(default_factory=AwpConfig)
    transform: PropertyTransform = field(default_factory=PropertyTransform)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: BeamConfig = field(default_factory=BeamConfig)

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "ExperimentConfig":
        obj = copy.deepcopy(obj)
        unknown = set(obj) - set(_SECTIONS) - {"seed"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        seed = int(obj.get("seed", 0))
        kwargs: Dict[str, Any] = {"seed": seed}
        for name, klass in _SECTIONS.items():
            section = dict(obj.get(name) or {})
            if name in ("synth", "sampler"):
                section.setdefault("seed", seed)
            names = {f.name for f in dataclasses.fields(klass) if f.init}
            bad = set(section) - names
            if bad:
                raise ValueError(f"unknown keys in section {name!r}: {sorted(bad)}")
            kwargs[name] = klass(**section)
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"seed": self.seed}
        for name in _SECTIONS:
            sec = getattr(self, name)
            out[name] = {f.name: _jsonable(getattr(sec, f.name))
                         for f in dataclasses.fields(sec) if f.init}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def with_overrides(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """Apply dotted-key overrides such as ``{"awp.alpha": 0.01, "seed": 3}``.

        Changing the root seed also moves any section seed that followed it.
        """
        obj = self.to_dict()
        old_seed = obj["seed"]
        for key, value in overrides.items():
            if key == "seed":
                obj["seed"] = value
                for sec in ("synth", "sampler"):
                    if obj[sec]["seed"] == old_seed:
                        obj[sec]["seed"] = value
                continue
            section, _, name = key.partition(".")
            if section not in _SECTIONS or not name:
                raise ValueError(f"bad override key {key!r}")
            obj[section][name] = value
        return ExperimentConfig.from_dict(obj)
