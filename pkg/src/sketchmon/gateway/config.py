"""Server configuration: JSON file plus environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

ENV_PREFIX = "SKETCHMON_"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    tcp_port: int = 7871
    ws_port: int = 7872
    metrics_port: int = 7873
    capacity: int = 50
    relay_interval_ms: int = 1000
    time_limit_s: float = 120.0
    auto_confirm: bool = False
    render_workers: int = 16
    detect_workers: int = 4
    detector: str = "oracle"  # oracle | stub | net
    model_path: str = ""
    input_size: int = 512
    session_dir: str = "sessions"
    static_dir: str = ""

    @classmethod
    def load(
        cls, path: str | Path | None = None, env: Mapping[str, str] = os.environ
    ) -> "ServerConfig":
        """File values override defaults; SKETCHMON_* env vars override both."""
        values: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text())
            unknown = set(raw) - {f.name for f in fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        for f in fields(cls):
            env_key = ENV_PREFIX + f.name.upper()
            if env_key in env:
                raw_value = env[env_key]
                if f.type in ("int",):
                    values[f.name] = int(raw_value)
                elif f.type in ("float",):
                    values[f.name] = float(raw_value)
                elif f.type in ("bool",):
                    values[f.name] = raw_value.lower() in ("1", "true", "yes", "on")
                else:
                    values[f.name] = raw_value
        return cls(**values)
