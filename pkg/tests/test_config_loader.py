"""
Unit tests for fairalloc/config_loader.py.

_config_path is patched to a temporary file so the real user config is never read.
"""
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))
from fairalloc.config_loader import Settings, _config_dir, load_config, load_settings
from fairalloc.exact import DEFAULT_LEAF_BUDGET


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    with patch("fairalloc.config_loader._config_path", return_value=path):
        yield path


def test_missing_file_gives_empty_dict(config_file):
    assert load_config() == {}
    assert load_settings().leaf_budget == DEFAULT_LEAF_BUDGET


def test_malformed_json_gives_empty_dict(config_file):
    config_file.write_text("{not json", encoding="utf-8")
    assert load_config() == {}


def test_non_object_gives_empty_dict(config_file):
    config_file.write_text("[1, 2, 3]", encoding="utf-8")
    assert load_config() == {}


def test_values_override_defaults(config_file):
    config_file.write_text('{"trials": 50, "seed": 3, "log_level": "DEBUG", "unknown": true}', encoding="utf-8")
    settings = load_settings()
    assert (settings.trials, settings.seed, settings.log_level) == (50, 3, "DEBUG")
    assert settings.leaf_budget == DEFAULT_LEAF_BUDGET


@pytest.mark.parametrize("content", ['{"trials": 0}', '{"log_level": "LOUD"}', '{"jobs": "many"}'])
def test_invalid_values_fall_back_to_defaults(config_file, content):
    config_file.write_text(content, encoding="utf-8")
    assert load_settings() == Settings()


def test_default_jobs_positive():
    assert Settings().jobs >= 1


@pytest.mark.parametrize("system, env, tail", [
    ("Linux", {"XDG_CONFIG_HOME": "/xdg"}, "/xdg/fairalloc"),
    ("Darwin", {}, "Library/Application Support/fairalloc"),
])
def test_config_dir_per_platform(monkeypatch, system, env, tail):
    for key, value in env.items():
        monkeypatch.setenv(key, value)
    with patch("fairalloc.config_loader.platform.system", return_value=system):
        assert _config_dir().as_posix().endswith(tail)
