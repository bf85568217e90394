"""
Configuration loader for grca.
"""

import dataclasses
import os
from enum import Enum
from typing import Any, Dict, Optional, Type, TypeVar

import yaml

from grca.errors import ConfigError, DomainError
from grca.logger import Logger
from grca.models import (
    ChainConfig,
    EvaluateConfig,
    MixingClass,
    PathsConfig,
    RunConfig,
    RunMode,
    SceneSpec,
    SignMode,
    UnmixConfig,
    UnmixMethod,
)
from grca.synth import SCENE_PRESETS, scene_preset

E = TypeVar("E", bound=Enum)

_CHAIN_FIELDS = {f.name for f in dataclasses.fields(ChainConfig)}
_SCENE_FIELDS = {f.name for f in dataclasses.fields(SceneSpec)}
_THRESHOLD_FIELDS = {f.name for f in dataclasses.fields(EvaluateConfig)}


def _enum(enum_type: Type[E], value: Any, where: str) -> E:
    if isinstance(value, enum_type):
        return value
    try:
        return enum_type(str(value).lower())
    except ValueError as e:
        choices = ", ".join(m.value for m in enum_type)
        raise ConfigError(f"{where}: '{value}' is not one of {choices}") from e


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    return section


def _check_keys(section: Dict[str, Any], allowed: set, name: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {', '.join(unknown)}")


def _build(cls, kwargs: Dict[str, Any], name: str):
    try:
        return cls(**kwargs)
    except (DomainError, TypeError) as e:
        raise ConfigError(f"Invalid '{name}' section: {e}") from e


def parse_scene(section: Dict[str, Any]) -> SceneSpec:
    section = dict(section)
    preset = section.pop("preset", None)
    _check_keys(section, _SCENE_FIELDS, "scene")
    if "class_models" in section:
        section["class_models"] = [
            _enum(MixingClass, m, "scene.class_models") for m in section["class_models"]
        ]
    if "snr_db" in section and "sigma2" not in section:
        section["sigma2"] = None
    if preset is None:
        return _build(SceneSpec, section, "scene")
    if preset not in SCENE_PRESETS:
        raise ConfigError(f"Unknown scene preset '{preset}', expected one of {sorted(SCENE_PRESETS)}")
    try:
        return scene_preset(preset, **section)
    except (DomainError, TypeError) as e:
        raise ConfigError(f"Invalid 'scene' section: {e}") from e


def parse_chain(section: Dict[str, Any]) -> ChainConfig:
    section = dict(section)
    _check_keys(section, _CHAIN_FIELDS, "chain")
    if "sign_mode" in section:
        section["sign_mode"] = _enum(SignMode, section["sign_mode"], "chain.sign_mode")
    return _build(ChainConfig, section, "chain")


def parse_unmix(section: Dict[str, Any]) -> UnmixConfig:
    kwargs = {
        "method": _enum(UnmixMethod, section.get("method", UnmixMethod.GRCA_PLUS.value), "unmix.method"),
        "eta": float(section.get("eta", 2.0)),
        "eta_sweep": [float(e) for e in section.get("eta_sweep") or []],
        "a0": float(section.get("a0", 1.0)),
        "a1": float(section.get("a1", 1.0)),
    }
    return _build(UnmixConfig, kwargs, "unmix")


def parse_evaluate(section: Dict[str, Any]) -> EvaluateConfig:
    thresholds = section.get("thresholds") or {}
    _check_keys(thresholds, _THRESHOLD_FIELDS, "evaluate.thresholds")
    return _build(
        EvaluateConfig,
        {k: None if v is None else float(v) for k, v in thresholds.items()},
        "evaluate.thresholds",
    )


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Build a RunConfig from already-parsed YAML data."""
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a mapping")
    # run manifests embed the configuration that produced them
    if "config_sha256" in data and isinstance(data.get("config"), dict):
        data = data["config"]
    paths = _section(data, "paths")
    _check_keys(paths, {"truth", "estimates", "output"}, "paths")

    config = RunConfig(
        version=str(data.get("version", "1")),
        mode=_enum(RunMode, data.get("mode", RunMode.UNMIX.value), "mode"),
        paths=PathsConfig(**paths),
        scene=parse_scene(_section(data, "scene")),
        chain=parse_chain(_section(data, "chain")),
        unmix=parse_unmix(_section(data, "unmix")),
        evaluate=parse_evaluate(_section(data, "evaluate")),
    )
    Logger.debug(f"Final config: {config}")
    return config


def load_config(config_path: str) -> RunConfig:
    """Load configuration from a YAML file."""
    if not os.path.exists(config_path):
        raise ConfigError(f"Config file not found: {config_path}")

    Logger.debug(f"Opening config file: {config_path}")
    with open(config_path, "r", encoding="utf-8") as f:
        try:
            config_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {config_path}: {e}") from e
    return parse_config(config_data)


def apply_overrides(
    config: RunConfig, seed: Optional[int] = None, out: Optional[str] = None
) -> RunConfig:
    """Command-line overrides: seed applies to both scene and chain."""
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {seed}")
        config = dataclasses.replace(
            config,
            scene=dataclasses.replace(config.scene, seed=seed),
            chain=dataclasses.replace(config.chain, seed=seed),
        )
    if out is not None:
        config = dataclasses.replace(config, paths=dataclasses.replace(config.paths, output=out))
    return config


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    """YAML-safe form of a RunConfig that parse_config reads back unchanged."""
    return {
        "version": config.version,
        "mode": config.mode.value,
        "paths": dataclasses.asdict(config.paths),
        "scene": _plain(dataclasses.asdict(config.scene)),
        "chain": _plain(dataclasses.asdict(config.chain)),
        "unmix": _plain(dataclasses.asdict(config.unmix)),
        "evaluate": {"thresholds": dataclasses.asdict(config.evaluate)},
    }
