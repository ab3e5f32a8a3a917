"""Run configuration: defaults match the published pipeline constants.

Precedence (lowest to highest): built-in defaults, SPANHOP_* environment
variables, config file (YAML or JSON), command-line flags. Environment
variables name nested keys as SPANHOP_<SECTION>__<KEY>.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ValidationFailure

SCHEMA_VERSION = "run_config/v1"


class ConfigError(ValidationFailure):
    pass


@dataclass
class MineConfig:
    min_narrations: int = 30
    max_narrations: int = 60
    min_clip_extent: float = 150.0
    t_min: int = 2
    t_max: int = 5
    min_candidate_extent: float = 10.0


@dataclass
class ProposalConfig:
    saliency_coef: float = 0.7
    similarity_coef: float = 0.10
    tau: float = 0.07
    fps: float = 8.0
    clip_offset: float = 0.0


@dataclass
class LossConfig:
    tau: float = 0.07
    lambda_bce: float = 1.0
    lambda_nce: float = 1.0


@dataclass
class EndpointConfig:
    llm_url: str = ""
    llm_model: str = "gpt-4o-2024-05-13"
    llm_auth_env: str = "SPANHOP_LLM_TOKEN"
    judge_url: str = ""
    judge_model: str = "gpt-4o-2024-05-13"
    judge_auth_env: str = "SPANHOP_JUDGE_TOKEN"
    embed_url: str = ""
    embed_model: str = "all-MiniLM-L6-v2"
    embed_auth_env: str = "SPANHOP_EMBED_TOKEN"
    replay_path: str = ""
    parallelism: int = 4


@dataclass
class GenerationConfig:
    retries: int = 1
    temperature: float = 0.0
    json_mode: bool = True


@dataclass
class RunConfig:
    schema_version: str = SCHEMA_VERSION
    clip_seconds: float = 180.0
    mine: MineConfig = field(default_factory=MineConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    losses: LossConfig = field(default_factory=LossConfig)
    endpoints: EndpointConfig = field(default_factory=EndpointConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)

    def validate(self) -> None:
        checks = [
            (self.clip_seconds > 0, "clip_seconds must be positive"),
            (self.mine.min_narrations >= 0, "mine.min_narrations must be >= 0"),
            (self.mine.max_narrations >= self.mine.min_narrations,
             "mine.max_narrations must be >= min_narrations"),
            (self.mine.min_clip_extent >= 0, "mine.min_clip_extent must be >= 0"),
            (self.mine.t_max > self.mine.t_min >= 0, "mine thresholds need t_max > t_min >= 0"),
            (self.mine.min_candidate_extent >= 0, "mine.min_candidate_extent must be >= 0"),
            (0 < self.proposals.saliency_coef <= 1, "proposals.saliency_coef must be in (0, 1]"),
            (0 < self.proposals.similarity_coef <= 1, "proposals.similarity_coef must be in (0, 1]"),
            (self.proposals.tau > 0, "proposals.tau must be positive"),
            (self.proposals.fps > 0, "proposals.fps must be positive"),
            (self.losses.tau > 0, "losses.tau must be positive"),
            (self.losses.lambda_bce >= 0, "losses.lambda_bce must be >= 0"),
            (self.losses.lambda_nce >= 0, "losses.lambda_nce must be >= 0"),
            (self.endpoints.parallelism >= 1, "endpoints.parallelism must be >= 1"),
            (self.generation.retries >= 0, "generation.retries must be >= 0"),
        ]
        problems = [msg for ok, msg in checks if not ok]
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)


def _merge_into(config: Any, values: Mapping[str, Any], path: str = "") -> None:
    valid = {f.name: f for f in fields(config)}
    for key, value in values.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {path + key!r}")
        current = getattr(config, key)
        if is_dataclass(current):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config section {path + key!r} must be a mapping")
            _merge_into(current, value, path=f"{path}{key}.")
        else:
            expected = type(current)
            if expected is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if expected is not type(None) and not isinstance(value, expected):
                raise ConfigError(
                    f"config key {path + key!r} expects {expected.__name__}, got {type(value).__name__}"
                )
            setattr(config, key, value)


def _env_overrides(env: Mapping[str, str]) -> dict:
    out: dict = {}
    for name, raw in env.items():
        if not name.startswith("SPANHOP_CFG_"):
            continue
        parts = name[len("SPANHOP_CFG_"):].lower().split("__")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        cursor = out
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
        cursor[parts[-1]] = value
    return out


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Build a RunConfig from defaults, environment, file, and flag overrides."""
    config = RunConfig()
    env_values = _env_overrides(env if env is not None else os.environ)
    if env_values:
        _merge_into(config, env_values)
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file {file_path} does not exist")
        text = file_path.read_text(encoding="utf-8")
        if file_path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        elif file_path.suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(f"config file {file_path} must be .yaml, .yml, or .json")
        if not isinstance(data, Mapping):
            raise ConfigError(f"config file {file_path} must hold a mapping")
        data = dict(data)
        declared = data.pop("schema_version", SCHEMA_VERSION)
        if declared != SCHEMA_VERSION:
            raise ConfigError(f"config schema {declared!r} unsupported (want {SCHEMA_VERSION})")
        _merge_into(config, data)
    if overrides:
        _merge_into(config, overrides)
    config.validate()
    return config
