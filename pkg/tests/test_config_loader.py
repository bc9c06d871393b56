import os
import json
import pytest
from src.config_loader import (
    DEFAULT_CONFIG,
    SUPPORTED_STRATEGIES,
    THREADS_ENV_VAR,
    get_thread_count,
    load_config,
    parse_oracle_name,
    validate_bound_mode,
    validate_strategy,
)
from src.errors import ConfigurationError

@pytest.fixture
def temp_config_file(tmp_path):
    """Create a temporary config file."""
    config_file = tmp_path / "config.json"
    config = {
        "STRATEGY": "LP8",
        "BOUND_MODE": "both",
        "RHO": 2,
        "MAX_NODES": 1000
    }
    config_file.write_text(json.dumps(config))
    return config_file

def test_validate_strategy():
    """Test strategy validation."""
    assert validate_strategy("maxsd") == "maxsd"
    assert validate_strategy("FREQ4") == "freq4"

    # Test with unsupported strategy
    assert validate_strategy("random") == "mostviol"

def test_validate_bound_mode():
    """Test bound mode validation."""
    assert validate_bound_mode("LP") == "lp"
    assert validate_bound_mode("nope") == "ld"

def test_parse_oracle_name():
    """Test oracle names."""
    assert parse_oracle_name("exact") == ("exact", 0)
    assert parse_oracle_name(" SA ") == ("sa", 0)
    assert parse_oracle_name("noisy:3") == ("noisy", 3)

    for bad in ("noisy:x", "noisy:-1", "gurobi"):
        with pytest.raises(ConfigurationError):
            parse_oracle_name(bad)

def test_get_thread_count(monkeypatch):
    """Test worker count from the environment."""
    monkeypatch.setenv(THREADS_ENV_VAR, '"6"')
    assert get_thread_count() == 6

    fallback = os.cpu_count() or 1
    monkeypatch.setenv(THREADS_ENV_VAR, "many")
    assert get_thread_count() == fallback
    monkeypatch.setenv(THREADS_ENV_VAR, "0")
    assert get_thread_count() == fallback
    monkeypatch.delenv(THREADS_ENV_VAR)
    assert get_thread_count() == fallback

def test_load_config_merges_defaults(temp_config_file):
    """Test loading config keeps user values over defaults."""
    config = load_config(str(temp_config_file))
    assert config["STRATEGY"] == "lp8"
    assert config["BOUND_MODE"] == "both"
    assert config["RHO"] == 2
    assert config["MAX_NODES"] == 1000
    assert config["K_SPEC"] == DEFAULT_CONFIG["K_SPEC"]

def test_load_config_broken_file(tmp_path):
    """Test loading an unreadable config falls back to defaults."""
    config_file = tmp_path / "config.json"
    config_file.write_text("{not json")

    config = load_config(str(config_file))
    assert config == DEFAULT_CONFIG

def test_load_config_creates_missing_file(tmp_path):
    """Test a missing config file is created with defaults."""
    config_file = tmp_path / "config" / "settings.json"

    config = load_config(str(config_file))
    assert config == DEFAULT_CONFIG
    assert json.loads(config_file.read_text()) == DEFAULT_CONFIG

def test_supported_strategies():
    """Test that all supported strategies are valid."""
    for name in SUPPORTED_STRATEGIES:
        assert validate_strategy(name) == name
