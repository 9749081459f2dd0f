"""RunConfig: the single JSON document driving every CLI command."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from biascope.bias import DEFAULT_K
from biascope.diversity import DEFAULT_FRACTIONS, SweepConfig
from biascope.encoders.models import PRESETS, CnnConfig, StubConfig, VitConfig
from biascope.errors import ConfigError
from biascope.synthgen.dataset import GeneratorFamily
from biascope.training.loop import TrainConfig
from biascope.training.probe import PROBE_EPOCHS

EFFECTIVE_NAME = "effective_config.json"

_ENCODER_CLASSES = {"vit": VitConfig, "cnn": CnnConfig, "stub": StubConfig}

DEFAULTS = {
    "generator": {"family": "CueConflict", "n": 1200, "size": 64, "seed": 0, "classes": None},
    "encoder": {"kind": "vit", "preset": "desk"},
    "train": {f.name: f.default for f in fields(TrainConfig)} | {"data": None},
    "eval": {"k": DEFAULT_K, "benchmark": None, "probe_data": None, "probe_epochs": PROBE_EPOCHS},
    "sweep": {"fractions": list(DEFAULT_FRACTIONS), "convergence_start": None, "seed": 0, "data": None},
    "output": {"dir": "runs/default"},
}


def _merge(section: str, given, defaults: dict, extra_ok: set[str] = frozenset()) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"section '{section}' must be a JSON object")
    for key in given:
        if key not in defaults and key not in extra_ok:
            raise ConfigError(f"unknown key '{section}.{key}'")
    return {**copy.deepcopy(defaults), **given}


@dataclass
class RunConfig:
    generator: dict
    encoder: dict
    train: dict
    eval: dict
    sweep: dict
    output: dict

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        for key in obj:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key '{key}'")
        kind = obj.get("encoder", {}).get("kind", "vit") if isinstance(obj.get("encoder"), dict) else "vit"
        if kind not in _ENCODER_CLASSES:
            raise ConfigError(f"encoder.kind: expected one of {sorted(_ENCODER_CLASSES)}, got {kind!r}")
        enc_fields = {f.name for f in fields(_ENCODER_CLASSES[kind])}
        merged = {
            name: _merge(name, obj.get(name, {}), DEFAULTS[name], enc_fields if name == "encoder" else set())
            for name in DEFAULTS
        }
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            return cls.from_dict(obj)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_dict({})

    def validate(self) -> None:
        # build every typed object once so bad values surface before any work starts
        try:
            GeneratorFamily(self.generator["family"])
        except ValueError:
            raise ConfigError(f"generator.family: unknown family {self.generator['family']!r}") from None
        for key in ("n", "size", "seed"):
            if not isinstance(self.generator[key], int) or isinstance(self.generator[key], bool):
                raise ConfigError(f"generator.{key}: expected an integer")
        for section, build in (
            ("encoder", self.encoder_config),
            ("train", self.train_config),
            ("sweep", self.sweep_config),
        ):
            try:
                build()
            except ConfigError:
                raise
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError(f"{section}: {exc}") from None
        k = self.eval["k"]
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ConfigError("eval.k: expected a positive integer")

    def encoder_config(self):
        enc = dict(self.encoder)
        kind, preset = enc.pop("kind"), enc.pop("preset")
        if (kind, preset) not in PRESETS:
            raise ConfigError(f"encoder.preset: unknown preset {preset!r} for kind {kind!r}")
        if "stage_channels" in enc:
            enc["stage_channels"] = tuple(enc["stage_channels"])
        return replace(PRESETS[(kind, preset)], **enc)

    def train_config(self) -> TrainConfig:
        t = {k: v for k, v in self.train.items() if k != "data"}
        return TrainConfig(**t)

    def sweep_config(self) -> SweepConfig:
        s = {k: v for k, v in self.sweep.items() if k != "data"}
        return SweepConfig(train=self.train_config(), k=self.eval["k"], **s)

    @property
    def out_dir(self) -> Path:
        return Path(self.output["dir"])

    def with_overrides(self, seed: int | None = None, out: str | None = None, k: int | None = None) -> "RunConfig":
        cfg = copy.deepcopy(self)
        if seed is not None:
            for section in (cfg.generator, cfg.train, cfg.sweep):
                section["seed"] = seed
        if out is not None:
            cfg.output["dir"] = str(out)
        if k is not None:
            cfg.eval["k"] = k
        cfg.validate()
        return cfg

    def to_json(self) -> dict:
        return {name: copy.deepcopy(getattr(self, name)) for name in DEFAULTS}

    def write_effective(self) -> Path:
        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)
        path = out / EFFECTIVE_NAME
        path.write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path
