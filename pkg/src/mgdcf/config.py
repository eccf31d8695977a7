"""Run configuration: one YAML document drives every CLI command.

The schema is flat sections of scalar keys. Unknown sections or keys are
rejected with the offending path spelled out, so typos fail loudly instead
of silently training with a default.
"""

from __future__ import annotations

import copy

import yaml

from .diffusion import PRESET_NAMES, DiffusionConfig
from .errors import ConfigurationError
from .homo import SparsificationConfig
from .losses import LossConfig
from .training import MODES, TrainConfig

__all__ = [
    "DEFAULT_CONFIG",
    "default_config",
    "load_config",
    "merge_config",
    "dump_config",
    "resolve_diffusion",
    "resolve_loss",
    "resolve_train",
    "resolve_sparsification",
]

DEFAULT_CONFIG: dict = {
    "dataset": {
        "train_path": "data/train.txt",
        "test_path": "data/test.txt",
    },
    "diffusion": {
        "preset": "custom",  # custom | lightgcn | appnp
        "alpha": 0.1,
        "beta": 0.9,
        "k_layers": None,  # null: 2 in homo mode, 4 otherwise
    },
    "homo": {
        "enabled": False,
        "s_percent": 97.0,
    },
    "loss": {
        "n_neg": 300,
        "l2_coeff": 1e-4,
    },
    "train": {
        "mode": "hetero",  # hetero | homo | none
        "epochs": 100,
        "batch_size": 8192,
        "lr": 1e-3,
        "seed": 42,
        "embedding_dim": 64,
        "eval_interval": None,  # null: every epoch, every 5 on large corpora
        "early_stop_patience": 50,
    },
    "eval": {
        "cutoff": 20,
    },
}

# key path -> (accepted types, allow None)
_SCHEMA: dict[tuple[str, str], tuple[tuple[type, ...], bool]] = {
    ("dataset", "train_path"): ((str,), False),
    ("dataset", "test_path"): ((str,), False),
    ("diffusion", "preset"): ((str,), False),
    ("diffusion", "alpha"): ((int, float), False),
    ("diffusion", "beta"): ((int, float), False),
    ("diffusion", "k_layers"): ((int,), True),
    ("homo", "enabled"): ((bool,), False),
    ("homo", "s_percent"): ((int, float), False),
    ("loss", "n_neg"): ((int,), False),
    ("loss", "l2_coeff"): ((int, float), False),
    ("train", "mode"): ((str,), False),
    ("train", "epochs"): ((int,), False),
    ("train", "batch_size"): ((int,), False),
    ("train", "lr"): ((int, float), False),
    ("train", "seed"): ((int,), False),
    ("train", "embedding_dim"): ((int,), False),
    ("train", "eval_interval"): ((int,), True),
    ("train", "early_stop_patience"): ((int,), False),
    ("eval", "cutoff"): ((int,), False),
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(overrides: dict | None) -> dict:
    """Validate ``overrides`` against the schema and merge over defaults."""
    config = default_config()
    if overrides is None:
        return config
    if not isinstance(overrides, dict):
        raise ConfigurationError("config root must be a mapping of sections")
    for section, body in overrides.items():
        if section not in config:
            raise ConfigurationError(f"unknown config section {section!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigurationError(f"section {section!r} must be a mapping")
        for key, value in body.items():
            path = (section, key)
            if path not in _SCHEMA:
                raise ConfigurationError(f"unknown config key {section}.{key}")
            types, allow_none = _SCHEMA[path]
            if value is None:
                if not allow_none:
                    raise ConfigurationError(f"{section}.{key} may not be null")
            elif not isinstance(value, types) or isinstance(value, bool) != (
                bool in types
            ):
                expected = "/".join(t.__name__ for t in types)
                raise ConfigurationError(
                    f"{section}.{key} expects {expected}, got {value!r}"
                )
            config[section][key] = value
    _cross_validate(config)
    return config


def _cross_validate(config: dict) -> None:
    if config["diffusion"]["preset"] not in PRESET_NAMES:
        raise ConfigurationError(
            f"diffusion.preset must be one of {PRESET_NAMES}"
        )
    if config["train"]["mode"] not in MODES:
        raise ConfigurationError(f"train.mode must be one of {MODES}")
    if config["train"]["mode"] == "homo" and not config["homo"]["enabled"]:
        raise ConfigurationError(
            "train.mode 'homo' requires homo.enabled: true"
        )


def load_config(path) -> dict:
    """Read a YAML config file and merge it over the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            overrides = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML ({exc})") from None
    return merge_config(overrides)


def dump_config(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=False, default_flow_style=False)


def resolve_diffusion(config: dict) -> DiffusionConfig:
    """Build the diffusion settings, defaulting k_layers by mode."""
    section = config["diffusion"]
    k_layers = section["k_layers"]
    if k_layers is None:
        k_layers = 2 if config["train"]["mode"] == "homo" else 4
    return DiffusionConfig.from_preset(
        section["preset"],
        alpha=float(section["alpha"]),
        beta=float(section["beta"]),
        k_layers=int(k_layers),
    )


def resolve_loss(config: dict) -> LossConfig:
    return LossConfig(
        n_neg=config["loss"]["n_neg"],
        l2_coeff=float(config["loss"]["l2_coeff"]),
    )


def resolve_train(config: dict) -> TrainConfig:
    section = config["train"]
    return TrainConfig(
        mode=section["mode"],
        epochs=section["epochs"],
        batch_size=section["batch_size"],
        learning_rate=float(section["lr"]),
        seed=section["seed"],
        embedding_dim=section["embedding_dim"],
        eval_interval=section["eval_interval"],
        early_stop_patience=section["early_stop_patience"],
    )


def resolve_sparsification(config: dict) -> SparsificationConfig:
    return SparsificationConfig(s_percent=float(config["homo"]["s_percent"]))
