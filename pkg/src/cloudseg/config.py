"""Run configuration: one JSON document covering every subsystem.

Values resolve in three layers: built-in defaults, then the config file, then
command-line flags. Unknown keys are rejected at every nesting level. All
randomness derives from the root ``seed``; each subsystem gets its own stream
via :func:`subsystem_seed`, so changing one stream leaves the others intact.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .experiments import SynthSpec
from .losscore import LossConfig, LossKind
from .microfcn.model import ModelConfig
from .microfcn.train import TrainConfig
from .raster.tiling import DEFAULT_PATCH, Overlap
from .sdaa import AZIMUTH_OFFSETS, GAMMAS, SHIFTS, SdaaParams

TASKS = ("cloud", "shadow", "multiclass")


@dataclass(frozen=True)
class SdaaGrid:
    azimuth_offsets: tuple[float, ...] = AZIMUTH_OFFSETS
    shifts: tuple[float, ...] = SHIFTS
    gammas: tuple[float, ...] = GAMMAS

    def params(self) -> list[SdaaParams]:
        return [SdaaParams(a, r, g) for a in self.azimuth_offsets for r in self.shifts for g in self.gammas]


@dataclass(frozen=True)
class TilingConfig:
    patch_size: int = DEFAULT_PATCH
    overlap: Overlap = Overlap.NONE
    threshold: float = 0.5
    # patches are resized to these sizes before the forward pass; None keeps them
    train_input_size: int | None = 192
    predict_input_size: int | None = 384

    def __post_init__(self):
        object.__setattr__(self, "overlap", Overlap(self.overlap))
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.patch_size < 1:
            raise ValueError("patch size must be positive")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    task: str = "cloud"
    loss_kind: LossKind = LossKind.FJL1
    out: str = "out"
    folds: int = 5
    holdout_fraction: float = 0.25
    loss: LossConfig = field(default_factory=LossConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sdaa: SdaaGrid = field(default_factory=SdaaGrid)
    tiling: TilingConfig = field(default_factory=TilingConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def train_config(self) -> TrainConfig:
        """Training settings with the seed derived from the root seed."""
        return replace(self.train, seed=subsystem_seed(self.seed, "train"))


# keys that exist on the component dataclasses but are derived, not configured
_DERIVED = {TrainConfig: {"seed"}, LossConfig: set(), ModelConfig: set()}


def subsystem_seed(root: int, name: str) -> int:
    """Independent 63-bit seed for subsystem ``name`` under ``root``."""
    ss = np.random.SeedSequence([root & 0xFFFFFFFF, root >> 32, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def _to_plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        skip = _DERIVED.get(type(value), set())
        return {f.name: _to_plain(getattr(value, f.name)) for f in fields(value) if f.name not in skip}
    if isinstance(value, (tuple, list)):
        return [_to_plain(v) for v in value]
    return value


def to_dict(cfg: RunConfig) -> dict:
    return _to_plain(cfg)


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, indent=2) + "\n"


def _nested_types():
    return {f.name: f.default_factory for f in fields(RunConfig) if f.default_factory is not dataclasses.MISSING}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"{where} must be an object")
    allowed = {f.name for f in fields(cls)} - _DERIVED.get(cls, set())
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        # JSON has no tuples; every sequence in the config is one
        kwargs[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**kwargs)


def from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``data`` onto ``base`` (defaults if omitted)."""
    base = base or RunConfig()
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    nested = _nested_types()
    top = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ValueError(f"unknown key(s) in config: {', '.join(unknown)}")
    changes = {}
    for key, value in data.items():
        if key in nested:
            current = _to_plain(getattr(base, key))
            if not isinstance(value, dict):
                raise ValueError(f"{key} must be an object")
            if key == "loss" and "epsilon" in value and "max_ce" not in value:
                # max_ce follows epsilon unless given explicitly
                current.pop("max_ce")
            if key == "model" and "classes" in value and "head" not in value:
                current.pop("head")
            changes[key] = _build(type(getattr(base, key)), {**current, **value}, key)
        else:
            changes[key] = value
    return replace(base, **changes)


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"config is not valid JSON: {e}") from e
    return from_dict(data, base)


def load(path, base: RunConfig | None = None) -> RunConfig:
    return loads(Path(path).read_text(), base)


def with_overrides(cfg: RunConfig, **flags) -> RunConfig:
    """Apply command-line flags; ``None`` means the flag was not given."""
    flags = {k: v for k, v in flags.items() if v is not None}
    data: dict = {}
    for key in ("seed", "out", "task", "loss_kind", "folds"):
        if key in flags:
            data[key] = flags[key]
    if "ce_variant" in flags:
        data["loss"] = {"ce_variant": flags["ce_variant"]}
    tiling = {k: flags[k] for k in ("patch_size", "overlap", "threshold") if k in flags}
    if tiling:
        data["tiling"] = tiling
    train = {k: flags[k] for k in ("epochs", "lr0", "batch_size") if k in flags}
    if train:
        data["train"] = train
    return from_dict(data, cfg)
