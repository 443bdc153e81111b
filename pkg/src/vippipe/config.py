"""Experiment configuration: YAML file + command-line overrides + open extras.

Precedence per key: command line > file > VIPPIPE_SEED (seed only) > built-in
default. Any unknown-but-well-formed key lands in ``extras`` and stays
retrievable everywhere downstream; only malformed overrides are errors.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable

import yaml

from .clip_sampler import ClipConfig
from .errors import ConfigTypeError, ParseError, UnknownOverride
from .transforms import TransformConfig

ENV_SEED = "VIPPIPE_SEED"

LOSS_TYPES = ("M_XENTROPY", "MSE")
LOAD_TYPES = ("train", "val", "test")


@dataclass
class RunConfig:
    """The fully resolved experiment configuration."""

    # experimental setup
    acc_metric: str = "Accuracy"
    batch_size: int = 3
    dataset: str = "synthetic"
    debug: int = 0
    epoch: int = 30
    exp: str = "exp"
    gamma: float = 0.1
    grad_max_norm: float = 10.0  # 0 disables clipping
    json_path: str = ""
    labels: int = 3
    load_type: str = "train"
    loss_type: str = "M_XENTROPY"
    lr: float = 1e-4
    milestones: list[int] = field(default_factory=lambda: [10, 20])
    model: str = "logistic_clip_classifier"
    momentum: float = 0.9
    num_workers: int = 2
    opt: str = "sgd"
    preprocess: str = "default"
    pretrained: int | str = 0
    pseudo_batch_loop: int = 1
    rerun: int = 1
    save_dir: str = "./results"
    seed: int = 999
    weight_decay: float = 5e-4
    # nested groups, flattened in the YAML file
    clip: ClipConfig = field(default_factory=ClipConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    extras: dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        """kwargs-style lookup: known keys first, then the extras bag."""
        for f in fields(self):
            if f.name == key:
                return getattr(self, key)
        for group in (self.clip, self.transform):
            if hasattr(group, key):
                return getattr(group, key)
        return self.extras.get(key, default)


def _as_int(key: str) -> Callable[[Any], int]:
    def parse(v: Any) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigTypeError(f"{key}: expected integer, got {v!r}")
        return v

    return parse


def _as_float(key: str) -> Callable[[Any], float]:
    def parse(v: Any) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigTypeError(f"{key}: expected number, got {v!r}")
        return float(v)

    return parse


def _as_str(key: str, choices: tuple[str, ...] | None = None) -> Callable[[Any], str]:
    def parse(v: Any) -> str:
        if not isinstance(v, str):
            raise ConfigTypeError(f"{key}: expected string, got {v!r}")
        if choices and v not in choices:
            raise ConfigTypeError(f"{key}: {v!r} not one of {list(choices)}")
        return v

    return parse


def _as_flag(key: str) -> Callable[[Any], bool]:
    def parse(v: Any) -> bool:
        if isinstance(v, bool):
            return v
        if v in (0, 1):
            return bool(v)
        raise ConfigTypeError(f"{key}: expected 0/1 flag, got {v!r}")

    return parse


def _as_shape(key: str) -> Callable[[Any], tuple[int, int] | None]:
    def parse(v: Any) -> tuple[int, int] | None:
        if v is None or v == "":
            return None
        if (
            isinstance(v, (list, tuple))
            and len(v) == 2
            and all(isinstance(x, int) and not isinstance(x, bool) and x > 0 for x in v)
        ):
            return (v[0], v[1])
        raise ConfigTypeError(f"{key}: expected [H, W] of positive integers, got {v!r}")

    return parse


def _as_int_list(key: str) -> Callable[[Any], list[int]]:
    def parse(v: Any) -> list[int]:
        if isinstance(v, (list, tuple)) and all(
            isinstance(x, int) and not isinstance(x, bool) for x in v
        ):
            return list(v)
        raise ConfigTypeError(f"{key}: expected a list of integers, got {v!r}")

    return parse


def _as_means(key: str) -> Callable[[Any], tuple[float, ...] | None]:
    def parse(v: Any) -> tuple[float, ...] | None:
        if v is None or v == "" or v == []:
            return None
        if isinstance(v, (list, tuple)) and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
        ):
            return tuple(float(x) for x in v)
        raise ConfigTypeError(f"{key}: expected '' or a list of per-channel means, got {v!r}")

    return parse


def _as_pretrained(key: str) -> Callable[[Any], int | str]:
    def parse(v: Any) -> int | str:
        if isinstance(v, bool):
            raise ConfigTypeError(f"{key}: expected 0, 1, or a checkpoint path, got {v!r}")
        if v in (0, 1):
            return int(v)
        if isinstance(v, str) and v:
            return v
        raise ConfigTypeError(f"{key}: expected 0, 1, or a checkpoint path, got {v!r}")

    return parse


def _as_opt_float(key: str) -> Callable[[Any], float | None]:
    inner = _as_float(key)

    def parse(v: Any) -> float | None:
        if v is None or v == "":
            return None
        return inner(v)

    return parse


# (target, attribute) -> parser; target "" is RunConfig itself.
_KNOWN: dict[str, tuple[str, str, Callable[[Any], Any]]] = {
    "acc_metric": ("", "acc_metric", _as_str("acc_metric")),
    "batch_size": ("", "batch_size", _as_int("batch_size")),
    "dataset": ("", "dataset", _as_str("dataset")),
    "debug": ("", "debug", _as_int("debug")),
    "epoch": ("", "epoch", _as_int("epoch")),
    "exp": ("", "exp", _as_str("exp")),
    "gamma": ("", "gamma", _as_float("gamma")),
    "grad_max_norm": ("", "grad_max_norm", _as_float("grad_max_norm")),
    "json_path": ("", "json_path", _as_str("json_path")),
    "labels": ("", "labels", _as_int("labels")),
    "load_type": ("", "load_type", _as_str("load_type", LOAD_TYPES)),
    "loss_type": ("", "loss_type", _as_str("loss_type", LOSS_TYPES)),
    "lr": ("", "lr", _as_float("lr")),
    "milestones": ("", "milestones", _as_int_list("milestones")),
    "model": ("", "model", _as_str("model")),
    "momentum": ("", "momentum", _as_float("momentum")),
    "num_workers": ("", "num_workers", _as_int("num_workers")),
    "opt": ("", "opt", _as_str("opt")),
    "preprocess": ("", "preprocess", _as_str("preprocess")),
    "pretrained": ("", "pretrained", _as_pretrained("pretrained")),
    "pseudo_batch_loop": ("", "pseudo_batch_loop", _as_int("pseudo_batch_loop")),
    "rerun": ("", "rerun", _as_int("rerun")),
    "save_dir": ("", "save_dir", _as_str("save_dir")),
    "seed": ("", "seed", _as_int("seed")),
    "weight_decay": ("", "weight_decay", _as_float("weight_decay")),
    "clip_length": ("clip", "clip_length", _as_int("clip_length")),
    "num_clips": ("clip", "num_clips", _as_int("num_clips")),
    "clip_stride": ("clip", "clip_stride", _as_int("clip_stride")),
    "clip_offset": ("clip", "clip_offset", _as_int("clip_offset")),
    "random_offset": ("clip", "random_offset", _as_flag("random_offset")),
    "mode": ("clip", "mode", _as_str("mode")),
    "resize_shape": ("transform", "resize_shape", _as_shape("resize_shape")),
    "crop_shape": ("transform", "crop_shape", _as_shape("crop_shape")),
    "crop_type": ("transform", "crop_type", _as_str("crop_type")),
    "flip_probability": ("transform", "flip_probability", _as_float("flip_probability")),
    "rotation_degrees": ("transform", "rotation_degrees", _as_opt_float("rotation_degrees")),
    "subtract_mean": ("transform", "subtract_mean", _as_means("subtract_mean")),
    "final_shape": ("transform", "final_shape", _as_shape("final_shape")),
}


def parse_overrides(overrides: Iterable[str]) -> dict[str, Any]:
    """Turn ``key=value`` strings into a mapping; values parse as YAML scalars."""
    parsed: dict[str, Any] = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise UnknownOverride(f"override {item!r} is not of the form key=value")
        if raw == "":
            parsed[key] = ""
            continue
        try:
            parsed[key] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise UnknownOverride(f"override {key}: cannot parse value {raw!r}: {exc}") from exc
    return parsed


def load_config(path: Path | str | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus overrides."""
    file_values: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ParseError(f"{path}: top level must be a mapping")
        file_values = loaded

    merged = dict(file_values)
    merged.update(parse_overrides(overrides))

    if "seed" not in merged and os.environ.get(ENV_SEED):
        try:
            merged["seed"] = int(os.environ[ENV_SEED])
        except ValueError as exc:
            raise ConfigTypeError(f"{ENV_SEED}: expected integer, got {os.environ[ENV_SEED]!r}") from exc

    cfg = RunConfig()
    clip_kwargs: dict[str, Any] = {}
    transform_kwargs: dict[str, Any] = {}
    for key, value in merged.items():
        if key in _KNOWN:
            target, attr, parse = _KNOWN[key]
            parsed = parse(value)
            if target == "clip":
                clip_kwargs[attr] = parsed
            elif target == "transform":
                transform_kwargs[attr] = parsed
            else:
                setattr(cfg, attr, parsed)
        else:
            cfg.extras[key] = value
    cfg.clip = ClipConfig(**clip_kwargs)
    cfg.transform = TransformConfig(**transform_kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.batch_size < 1:
        raise ConfigTypeError(f"batch_size: must be >= 1, got {cfg.batch_size}")
    if cfg.pseudo_batch_loop < 1:
        raise ConfigTypeError(f"pseudo_batch_loop: must be >= 1, got {cfg.pseudo_batch_loop}")
    if cfg.epoch < 1:
        raise ConfigTypeError(f"epoch: must be >= 1, got {cfg.epoch}")
    if cfg.gamma < 0:
        raise ConfigTypeError(f"gamma: must be >= 0, got {cfg.gamma}")
    if any(b <= a for a, b in zip(cfg.milestones, cfg.milestones[1:])):
        raise ConfigTypeError(f"milestones: must be strictly increasing, got {cfg.milestones}")
    if cfg.lr <= 0:
        raise ConfigTypeError(f"lr: must be > 0, got {cfg.lr}")
    if not (0 <= cfg.momentum < 1):
        raise ConfigTypeError(f"momentum: must be in [0, 1), got {cfg.momentum}")
    if cfg.weight_decay < 0:
        raise ConfigTypeError(f"weight_decay: must be >= 0, got {cfg.weight_decay}")
    if cfg.grad_max_norm < 0:
        raise ConfigTypeError(f"grad_max_norm: must be >= 0, got {cfg.grad_max_norm}")
    if cfg.num_workers < 0:
        raise ConfigTypeError(f"num_workers: must be >= 0, got {cfg.num_workers}")
    if cfg.labels < 1:
        raise ConfigTypeError(f"labels: must be >= 1, got {cfg.labels}")
    if cfg.debug < 0:
        raise ConfigTypeError(f"debug: must be >= 0, got {cfg.debug}")
    if cfg.rerun not in (0, 1):
        raise ConfigTypeError(f"rerun: must be 0 or 1, got {cfg.rerun}")


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Flatten a RunConfig back into the YAML key set (plus extras)."""
    out: dict[str, Any] = {}
    for key, (target, attr, _) in _KNOWN.items():
        if target == "clip":
            value: Any = getattr(cfg.clip, attr)
        elif target == "transform":
            value = getattr(cfg.transform, attr)
        else:
            value = getattr(cfg, attr)
        if value is None:
            continue  # optional keys are simply omitted
        if key == "random_offset":
            value = int(value)
        if isinstance(value, tuple):
            value = list(value)
        out[key] = value
    out.update(cfg.extras)
    return out


def config_digest(cfg: RunConfig) -> str:
    """Stable hash of the effective configuration."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_config_snapshot(cfg: RunConfig, path: Path | str) -> Path:
    """Write the effective config so the run can be reproduced from the file alone."""
    path = Path(path)
    path.write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=True), encoding="utf-8")
    return path
