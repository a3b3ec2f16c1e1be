"""
Flat ``key = value`` experiment configuration.

Lines starting with ``#`` are comments. Every key has a typed default;
unknown keys and unparsable values are rejected. List-valued keys take
comma-separated items. Artifact paths default to files under ``output``.
"""

from __future__ import annotations

import math
import os
from dataclasses import fields
from typing import Dict, Iterable, List, Optional

from .channel import ChannelModelConfig
from .experiment import METHODS, parse_method
from .pilots import PilotPattern
from .training import LOSSES, TrainConfig


class ConfigError(ValueError):
    """Invalid configuration text, key or value."""


_CHANNEL_FIELDS = [f for f in fields(ChannelModelConfig) if f.name != "seed"]

DEFAULTS: Dict[str, object] = {
    **{f"channel.{f.name}": f.default for f in _CHANNEL_FIELDS},
    "pilot.stride": 4,
    "pilot.offset": 0,
    "snr_db": 20.0,
    "recovery": ["ls"],
    "interp": ["paper_linear", "paper_gaussian", "srcnn", "edsr"],
    "data.train_frames": 200,
    "data.val_frames": 50,
    "train.arch": "srcnn",
    "train.epochs": 0,
    "train.batch_size": 8,
    "train.learning_rate": 0.0,
    "train.loss": "",
    "train.recovery": "ls",
    "train.keep_best": True,
    "paths.train_data": "",
    "paths.val_data": "",
    "paths.srcnn_checkpoint": "",
    "paths.edsr_checkpoint": "",
    "output": "run",
    "seed": 0,
}

# per-architecture values used when train.epochs / train.learning_rate are left at 0
DEFAULT_EPOCHS = {"srcnn": 8, "edsr": 20}
DEFAULT_LR = {"srcnn": 1e-4, "edsr": 3e-4}

_DEFAULT_FILES = {
    "paths.train_data": "train.csid",
    "paths.val_data": "val.csid",
    "paths.srcnn_checkpoint": "srcnn.csck",
    "paths.edsr_checkpoint": "edsr.csck",
}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN is not allowed")
    return value


def _parse_value(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return _parse_float(text)
        if isinstance(default, list):
            items = [t.strip().lower() for t in text.split(",") if t.strip()]
            if not items:
                raise ValueError("empty list")
            return items
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def parse_text(text: str, source: str = "<config>") -> Dict[str, object]:
    """Parse config text into a ``{key: typed value}`` dict of explicit settings."""
    out: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


class ExperimentConfig:
    """Resolved settings; built from defaults plus explicit values, or with :meth:`load`."""

    def __init__(self, values: Optional[Dict[str, object]] = None):
        merged = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULTS.items()}
        for key, value in (values or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
            merged[key] = value
        self.values = merged
        self.validate()

    @classmethod
    def load(cls, path=None, overrides: Iterable[str] = (), seed: Optional[int] = None,
             out: Optional[str] = None) -> "ExperimentConfig":
        values: Dict[str, object] = {}
        if path is not None:
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            values.update(parse_text(text, str(path)))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override must be key=value, got {item!r}")
            values.update(parse_text(item, "--override"))
        if seed is not None:
            values["seed"] = int(seed)
        if out is not None:
            values["output"] = out
        return cls(values)

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self):
        v = self.values
        try:
            self.channel()
            self.pattern()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for r in v["recovery"] + [v["train.recovery"]]:
            if r not in ("ls", "mmse"):
                raise ConfigError(f"unknown recovery {r!r} (expected ls or mmse)")
        for m in v["interp"]:
            try:
                parse_method(m)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if v["train.arch"] not in ("srcnn", "edsr"):
            raise ConfigError(f"train.arch must be srcnn or edsr, got {v['train.arch']!r}")
        if v["train.loss"] and v["train.loss"] not in LOSSES:
            raise ConfigError(f"train.loss must be one of {sorted(LOSSES)}, got {v['train.loss']!r}")
        for key in ("data.train_frames", "data.val_frames", "train.batch_size"):
            if v[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
        if v["train.epochs"] < 0 or v["train.learning_rate"] < 0:
            raise ConfigError("train.epochs and train.learning_rate must be non-negative")
        if not 0 <= v["seed"] < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not v["output"]:
            raise ConfigError("output must name a directory")

    def channel(self) -> ChannelModelConfig:
        kwargs = {f.name: self.values[f"channel.{f.name}"] for f in _CHANNEL_FIELDS}
        return ChannelModelConfig(seed=self.values["seed"], **kwargs)

    def pattern(self) -> PilotPattern:
        s, o = self.values["pilot.stride"], self.values["pilot.offset"]
        return PilotPattern(o, s, o, s)

    def train_config(self) -> TrainConfig:
        arch = self.values["train.arch"]
        return TrainConfig(epochs=self.values["train.epochs"] or DEFAULT_EPOCHS[arch],
                           batch_size=self.values["train.batch_size"],
                           learning_rate=self.values["train.learning_rate"] or DEFAULT_LR[arch],
                           loss=self.values["train.loss"] or None, seed=self.values["seed"],
                           snr_db=self.values["snr_db"], recovery=self.values["train.recovery"],
                           keep_best=self.values["train.keep_best"])

    def path(self, key: str) -> str:
        return self.values[key] or os.path.join(self.values["output"], _DEFAULT_FILES[key])

    def render(self) -> List[str]:
        """``key = value`` lines in sorted key order, suitable for re-parsing."""
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, list):
                text = ",".join(value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{key} = {text}")
        return lines


__all__ = ["ConfigError", "DEFAULTS", "ExperimentConfig", "METHODS", "parse_text"]
