"""Config file parsing and environment overrides."""

import pytest

from open_intake.config import load_config
from open_intake.errors import ConfigError


def test_defaults_without_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = load_config(env={})
    assert config.data_dir == "./data"
    assert config.bind_host == "127.0.0.1"
    assert config.bind_port == 8080
    assert config.rate_limit.capacity == 10
    assert config.rate_limit.refill_per_minute == 5.0
    assert config.notifier.max_retries == 3
    assert config.remoderate_on_edit is True


def test_file_values(tmp_path):
    path = tmp_path / "open-intake.toml"
    path.write_text(
        """
data_dir = "/srv/intake"
bind = "0.0.0.0:9000"
base_url = "https://intake.example.com"
remoderate_on_edit = false

[owner_keys]
demo = "k1"
other = "k2"

[rate_limit]
capacity = 25
refill_per_minute = 12.5
salt = "pepper"

[notifier]
adapter = "smtp"
max_retries = 5

[notifier.smtp]
host = "mail.example.com"
port = 587
use_tls = true

[cors]
admin_origins = ["https://dash.example.com"]

[clock]
mode = "logical"
start = "2021-05-01T00:00:00Z"
"""
    )
    config = load_config(path, env={})
    assert config.data_dir == "/srv/intake"
    assert config.bind_port == 9000
    assert config.owner_keys == {"demo": "k1", "other": "k2"}
    assert config.remoderate_on_edit is False
    assert config.rate_limit.capacity == 25
    assert config.rate_limit.salt == "pepper"
    assert config.notifier.adapter == "smtp"
    assert config.notifier.smtp.host == "mail.example.com"
    assert config.notifier.smtp.use_tls is True
    assert config.admin_origins == ["https://dash.example.com"]
    assert config.clock_mode == "logical"
    assert config.clock_start == "2021-05-01T00:00:00Z"


def test_env_overrides_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('data_dir = "/from-file"\nbind = "127.0.0.1:8080"\n')
    env = {
        "OPEN_INTAKE_DATA_DIR": "/from-env",
        "OPEN_INTAKE_BIND": "127.0.0.1:9999",
        "OPEN_INTAKE_OWNER_KEYS": "demo=k1,other=k2",
        "OPEN_INTAKE_RATE_LIMIT_CAPACITY": "3",
        "OPEN_INTAKE_REMODERATE_ON_EDIT": "false",
        "OPEN_INTAKE_CLOCK_MODE": "logical",
    }
    config = load_config(path, env=env)
    assert config.data_dir == "/from-env"
    assert config.bind_port == 9999
    assert config.owner_keys == {"demo": "k1", "other": "k2"}
    assert config.rate_limit.capacity == 3
    assert config.remoderate_on_edit is False
    assert config.clock_mode == "logical"


def test_missing_explicit_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml", env={})


def test_bad_toml_errors(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("data_dir = [unclosed")
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_bad_bind_errors(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('bind = "no-port-here"\n')
    config = load_config(path, env={})
    with pytest.raises(ConfigError):
        config.bind_port


def test_outbox_path_defaults_into_data_dir(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(f'data_dir = "{tmp_path}/d"\n')
    config = load_config(path, env={})
    assert str(config.resolved_outbox_path()).endswith("d/outbox.jsonl")
