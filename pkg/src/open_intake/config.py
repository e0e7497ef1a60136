"""Declarative service configuration.

One TOML file (default ./open-intake.toml) describes the whole deployment;
environment variables prefixed OPEN_INTAKE_ override individual values.
Everything has a usable default so `open-intake init && open-intake serve`
works with no file at all.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_CONFIG_PATH = "open-intake.toml"


@dataclass
class SmtpConfig:
    host: str = "localhost"
    port: int = 25
    username: str | None = None
    password: str | None = None
    use_tls: bool = False
    sender: str = "open-intake@localhost"


@dataclass
class NotifierConfig:
    adapter: str = "outbox"  # outbox | smtp | memory
    outbox_path: str | None = None  # default: <data_dir>/outbox.jsonl
    max_retries: int = 3
    backoff_seconds: float = 1.0
    async_worker: bool = False
    smtp: SmtpConfig = field(default_factory=SmtpConfig)


@dataclass
class RateLimitConfig:
    enabled: bool = True
    capacity: int = 10
    refill_per_minute: float = 5.0
    salt: str = "open-intake"


@dataclass
class ServiceConfig:
    data_dir: str = "./data"
    bind: str = "127.0.0.1:8080"
    base_url: str = "http://127.0.0.1:8080"
    owner_keys: dict[str, str] = field(default_factory=dict)
    remoderate_on_edit: bool = True  # default applied to newly created sites
    admin_origins: list[str] = field(default_factory=list)
    clock_mode: str = "wall"  # wall | logical (logical is for reproducible replays)
    clock_start: str = "2020-01-01T00:00:00Z"
    notifier: NotifierConfig = field(default_factory=NotifierConfig)
    rate_limit: RateLimitConfig = field(default_factory=RateLimitConfig)

    @property
    def bind_host(self) -> str:
        return self.bind.rsplit(":", 1)[0]

    @property
    def bind_port(self) -> int:
        try:
            return int(self.bind.rsplit(":", 1)[1])
        except (IndexError, ValueError):
            raise ConfigError(f"bind must look like host:port, got {self.bind!r}")

    def resolved_outbox_path(self) -> Path:
        if self.notifier.outbox_path:
            return Path(self.notifier.outbox_path)
        return Path(self.data_dir) / "outbox.jsonl"


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def load_config(
    path: str | Path | None = None, env: dict[str, str] | None = None
) -> ServiceConfig:
    """Read the TOML file (if it exists) and apply OPEN_INTAKE_* env overrides."""
    env = os.environ if env is None else env
    config = ServiceConfig()

    candidate = Path(path) if path is not None else Path(DEFAULT_CONFIG_PATH)
    if candidate.exists():
        try:
            doc = tomllib.loads(candidate.read_text("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {candidate}: {exc}")
        _apply_file(config, doc)
    elif path is not None:
        raise ConfigError(f"config file not found: {candidate}")

    _apply_env(config, env)
    return config


def _apply_file(config: ServiceConfig, doc: dict) -> None:
    for key in ("data_dir", "bind", "base_url"):
        if key in doc:
            setattr(config, key, str(doc[key]))
    if "remoderate_on_edit" in doc:
        config.remoderate_on_edit = _as_bool(doc["remoderate_on_edit"])
    if "owner_keys" in doc:
        config.owner_keys = {str(k): str(v) for k, v in doc["owner_keys"].items()}

    limits = doc.get("rate_limit", {})
    if "enabled" in limits:
        config.rate_limit.enabled = _as_bool(limits["enabled"])
    if "capacity" in limits:
        config.rate_limit.capacity = int(limits["capacity"])
    if "refill_per_minute" in limits:
        config.rate_limit.refill_per_minute = float(limits["refill_per_minute"])
    if "salt" in limits:
        config.rate_limit.salt = str(limits["salt"])

    notif = doc.get("notifier", {})
    if "adapter" in notif:
        config.notifier.adapter = str(notif["adapter"])
    if "outbox_path" in notif:
        config.notifier.outbox_path = str(notif["outbox_path"]) or None
    if "max_retries" in notif:
        config.notifier.max_retries = int(notif["max_retries"])
    if "backoff_seconds" in notif:
        config.notifier.backoff_seconds = float(notif["backoff_seconds"])
    if "async_worker" in notif:
        config.notifier.async_worker = _as_bool(notif["async_worker"])
    smtp = notif.get("smtp", {})
    for key in ("host", "sender"):
        if key in smtp:
            setattr(config.notifier.smtp, key, str(smtp[key]))
    if "port" in smtp:
        config.notifier.smtp.port = int(smtp["port"])
    for key in ("username", "password"):
        if key in smtp:
            setattr(config.notifier.smtp, key, str(smtp[key]))
    if "use_tls" in smtp:
        config.notifier.smtp.use_tls = _as_bool(smtp["use_tls"])

    cors = doc.get("cors", {})
    if "admin_origins" in cors:
        config.admin_origins = [str(o) for o in cors["admin_origins"]]

    clock = doc.get("clock", {})
    if "mode" in clock:
        config.clock_mode = str(clock["mode"])
    if "start" in clock:
        config.clock_start = str(clock["start"])


def _apply_env(config: ServiceConfig, env) -> None:
    def get(name: str) -> str | None:
        return env.get(f"OPEN_INTAKE_{name}")

    simple = {
        "DATA_DIR": ("data_dir", str),
        "BIND": ("bind", str),
        "BASE_URL": ("base_url", str),
        "CLOCK_MODE": ("clock_mode", str),
        "CLOCK_START": ("clock_start", str),
    }
    for env_name, (attr, cast) in simple.items():
        value = get(env_name)
        if value is not None:
            setattr(config, attr, cast(value))
    if get("REMODERATE_ON_EDIT") is not None:
        config.remoderate_on_edit = _as_bool(get("REMODERATE_ON_EDIT"))
    if get("OWNER_KEYS") is not None:
        pairs = [p for p in get("OWNER_KEYS").split(",") if p.strip()]
        config.owner_keys = dict(p.split("=", 1) for p in pairs)
    if get("ADMIN_ORIGINS") is not None:
        config.admin_origins = [
            o.strip() for o in get("ADMIN_ORIGINS").split(",") if o.strip()
        ]
    if get("RATE_LIMIT_ENABLED") is not None:
        config.rate_limit.enabled = _as_bool(get("RATE_LIMIT_ENABLED"))
    if get("RATE_LIMIT_CAPACITY") is not None:
        config.rate_limit.capacity = int(get("RATE_LIMIT_CAPACITY"))
    if get("RATE_LIMIT_REFILL_PER_MINUTE") is not None:
        config.rate_limit.refill_per_minute = float(get("RATE_LIMIT_REFILL_PER_MINUTE"))
    if get("RATE_LIMIT_SALT") is not None:
        config.rate_limit.salt = get("RATE_LIMIT_SALT")
    if get("NOTIFIER_ADAPTER") is not None:
        config.notifier.adapter = get("NOTIFIER_ADAPTER")
    if get("OUTBOX_PATH") is not None:
        config.notifier.outbox_path = get("OUTBOX_PATH")
    if get("NOTIFIER_ASYNC_WORKER") is not None:
        config.notifier.async_worker = _as_bool(get("NOTIFIER_ASYNC_WORKER"))
