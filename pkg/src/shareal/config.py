"""Service configuration: one JSON file or keyword overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigInvalid

DEFAULT_SESSION_TTL_MS = 24 * 60 * 60 * 1000
DEFAULT_SWEEP_INTERVAL_MS = 60 * 60 * 1000
DEFAULT_TIMEOUT_MS = 10 * 60 * 1000


@dataclass
class ServiceConfig:
    data_dir: Path
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    slots: int = 2
    default_timeout_ms: int = DEFAULT_TIMEOUT_MS
    runner_registry_path: Path | None = None
    session_ttl_ms: int = DEFAULT_SESSION_TTL_MS
    sweep_interval_ms: int = DEFAULT_SWEEP_INTERVAL_MS
    tick_interval_ms: int = 50
    bootstrap_admin: str = "admin"
    bootstrap_secret: str = "admin"
    static_dir: Path | None = None

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.runner_registry_path is None:
            self.runner_registry_path = self.data_dir / "runtimes.json"
        else:
            self.runner_registry_path = Path(self.runner_registry_path)
        if self.static_dir is not None:
            self.static_dir = Path(self.static_dir)

    def validate(self) -> None:
        if self.slots < 1:
            raise ConfigInvalid("slots must be >= 1")
        for name in ("default_timeout_ms", "session_ttl_ms", "sweep_interval_ms", "tick_interval_ms"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")
        if not self.bootstrap_admin or not self.bootstrap_secret:
            raise ConfigInvalid("bootstrap admin credentials must be nonempty")
        if self.static_dir is not None and not self.static_dir.is_dir():
            raise ConfigInvalid(f"static_dir {self.static_dir} is not a directory")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigInvalid(f"config file {path} does not exist")
        except ValueError as exc:
            raise ConfigInvalid(f"config file is not valid JSON: {exc}")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        if "data_dir" not in raw:
            raise ConfigInvalid("config must set data_dir")
        return cls(**raw)
