"""Strict JSON experiment configs: unknown keys rejected, defaults documented.

Defaults: head lr 1e-4, backbone lr 4e-4, epoch counts 2/2/2, step decay
0.5 every 10 rounds, AdamW with weight decay 0.1, 25% local test split.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

STRATEGIES = ("li", "li_no_optional", "fedavg", "isolated", "per_batch_ring", "mtl_li")


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set[str], path: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}" if path else f"unknown key {key}")


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"missing required key {path}.{key}" if path else f"missing required key {key}")
    return section[key]


@dataclass
class DatasetConfig:
    kind: str = "blobs"  # blobs | multi_attribute | idx
    num_classes: int = 10
    dims: int = 20
    samples_per_class: int = 30
    cluster_spread: float = 1.0
    inter_cluster_scale: float = 3.0
    mean_rank: int | None = None
    nuisance_spread: float | None = None
    tasks: int = 8
    samples: int = 480
    shared_rank: int = 4
    label_noise: float = 0.0
    latent_margin: float | None = None
    images: str = ""
    labels: str = ""


@dataclass
class HeterogeneityConfigSection:
    scheme: str = "pathological"  # pathological | dirichlet | even
    clients: int = 5
    classes_per_client: int = 2
    beta: float = 0.1


@dataclass
class ModelConfig:
    widths: list[int] = field(default_factory=lambda: [20, 64, 32, 10])
    split_index: int = 2


@dataclass
class ScheduleConfig:
    rounds: int = 30
    e_head: int = 2
    e_backbone: int = 2
    e_full: int = 2
    batch_size: int = 10
    head_lr: float = 1e-4
    backbone_lr: float = 4e-4
    lr_gamma: float = 0.5
    lr_period: int = 10
    fine_tune_epochs: int = 6
    fine_tune_lr: float = 1e-2
    head_warmup_epochs: int = 0
    optimizer: str = "adamw"
    weight_decay: float = 0.1


@dataclass
class GlobalModelConfig:
    probe: bool = False
    stacked: bool = False
    moe: bool = False
    epochs: int = 20
    lr: float = 1e-3


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "runs/experiment"
    strategy: str = "li"
    test_fraction: float = 0.25
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    heterogeneity: HeterogeneityConfigSection = field(default_factory=HeterogeneityConfigSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    global_model: GlobalModelConfig = field(default_factory=GlobalModelConfig)
    fault_script: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "heterogeneity": HeterogeneityConfigSection,
    "model": ModelConfig,
    "schedule": ScheduleConfig,
    "global_model": GlobalModelConfig,
}
_SCALAR_KEYS = {"seed", "output_dir", "strategy", "test_fraction", "fault_script"}


def parse_config_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _SCALAR_KEYS | set(_SECTION_TYPES), "")
    cfg = ExperimentConfig()
    for key in _SCALAR_KEYS:
        if key in raw:
            setattr(cfg, key, raw[key])
    for name, cls in _SECTION_TYPES.items():
        if name not in raw:
            continue
        section = raw[name]
        if not isinstance(section, dict):
            raise ConfigError(f"{name} must be a JSON object")
        defaults = cls()
        _check_keys(section, set(vars(defaults)), name)
        for k, v in section.items():
            setattr(defaults, k, v)
        setattr(cfg, name, defaults)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {cfg.strategy!r}")
    if not (0 < cfg.test_fraction < 1):
        raise ConfigError("test_fraction must lie in (0, 1)")
    if cfg.dataset.kind not in ("blobs", "multi_attribute", "idx"):
        raise ConfigError(f"dataset.kind {cfg.dataset.kind!r} unknown")
    if cfg.dataset.kind == "idx" and not (cfg.dataset.images and cfg.dataset.labels):
        raise ConfigError("dataset.images and dataset.labels required for idx datasets")
    if cfg.heterogeneity.scheme not in ("pathological", "dirichlet", "even"):
        raise ConfigError(f"heterogeneity.scheme {cfg.heterogeneity.scheme!r} unknown")
    if cfg.heterogeneity.clients < 1:
        raise ConfigError("heterogeneity.clients must be >= 1")
    if len(cfg.model.widths) < 3:
        raise ConfigError("model.widths needs at least input, one hidden, and output width")
    if not (0 < cfg.model.split_index < len(cfg.model.widths) - 1):
        raise ConfigError("model.split_index must leave both segments non-empty")
    sc = cfg.schedule
    if sc.rounds < 1 or sc.batch_size < 1:
        raise ConfigError("schedule.rounds and schedule.batch_size must be >= 1")
    if min(sc.e_head, sc.e_backbone, sc.e_full,
           sc.fine_tune_epochs, sc.head_warmup_epochs) < 0:
        raise ConfigError("schedule epoch counts must be non-negative")
    if sc.head_lr <= 0 or sc.backbone_lr <= 0 or sc.fine_tune_lr <= 0:
        raise ConfigError("learning rates must be positive")
    if not (0 < sc.lr_gamma <= 1) or sc.lr_period < 1:
        raise ConfigError("schedule.lr_gamma in (0,1] and lr_period >= 1 required")
    if sc.optimizer not in ("sgd", "adamw"):
        raise ConfigError(f"schedule.optimizer {sc.optimizer!r} unknown")
    if cfg.strategy == "mtl_li" and cfg.dataset.kind != "multi_attribute":
        raise ConfigError("mtl_li requires dataset.kind = multi_attribute")


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    return parse_config_dict(raw)
