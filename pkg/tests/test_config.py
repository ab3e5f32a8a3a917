from __future__ import annotations

import pytest

from spanhop.config import ConfigError, RunConfig, load_config


def test_defaults_match_published_constants():
    config = load_config(env={})
    assert config.clip_seconds == 180.0
    assert config.mine.min_narrations == 30
    assert config.mine.max_narrations == 60
    assert config.mine.min_clip_extent == 150.0
    assert config.mine.t_min == 2
    assert config.mine.t_max == 5
    assert config.mine.min_candidate_extent == 10.0
    assert config.proposals.saliency_coef == 0.7
    assert config.proposals.similarity_coef == 0.10
    assert config.proposals.fps == 8.0


def test_yaml_file_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "# mining thresholds for a quick smoke run\n"
        "mine:\n  t_min: 1\n  t_max: 9\n"
        "proposals:\n  saliency_coef: 0.6\n"
    )
    config = load_config(path, env={})
    assert config.mine.t_min == 1
    assert config.proposals.saliency_coef == 0.6
    assert config.mine.min_narrations == 30  # untouched default


def test_json_mirror(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"schema_version": "run_config/v1", "clip_seconds": 120}')
    assert load_config(path, env={}).clip_seconds == 120.0


def test_precedence_env_then_file_then_flags(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("mine:\n  t_max: 7\n")
    env = {"SPANHOP_CFG_MINE__T_MAX": "6", "SPANHOP_CFG_MINE__T_MIN": "1"}
    config = load_config(path, env=env, overrides={"mine": {"t_min": 3}})
    assert config.mine.t_max == 7  # file beats env
    assert config.mine.t_min == 3  # flags beat file and env


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("mining:\n  t_min: 1\n")
    with pytest.raises(ConfigError, match="mining"):
        load_config(path, env={})


def test_range_validation():
    with pytest.raises(ConfigError, match="saliency_coef"):
        load_config(env={}, overrides={"proposals": {"saliency_coef": 1.5}})
    with pytest.raises(ConfigError, match="t_max"):
        load_config(env={}, overrides={"mine": {"t_min": 5, "t_max": 5}})


def test_schema_version_checked(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"schema_version": "run_config/v9"}')
    with pytest.raises(ConfigError, match="run_config/v9"):
        load_config(path, env={})


def test_type_mismatch_rejected():
    with pytest.raises(ConfigError, match="expects int"):
        load_config(env={}, overrides={"mine": {"t_min": "two"}})


def test_to_dict_round_trip():
    config = RunConfig()
    data = config.to_dict()
    rebuilt = load_config(env={}, overrides=data)
    assert rebuilt == config
