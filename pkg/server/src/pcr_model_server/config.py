"""Server configuration: flags > PCR_SERVER_* env > config file > defaults."""

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

ENV_PREFIX = "PCR_SERVER_"

DEFAULT_MODEL_ID = "seeded-hash-v1"


class ServerConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"server config field {field}: {message}")
        self.field = field


@dataclass
class ServerConfig:
    model_id: str = DEFAULT_MODEL_ID
    host: str = "127.0.0.1"
    port: int = 8321
    top_k_ceiling: int = 50
    max_tokens: int = 512
    prompt_max_len: int = 300  # the client-side budget max_tokens must cover
    seed: int = 0

    def validate(self) -> None:
        if not self.model_id:
            raise ServerConfigError("model_id", "must be non-empty")
        if self.top_k_ceiling < 1:
            raise ServerConfigError("top_k_ceiling", "must be >= 1")
        if self.max_tokens < self.prompt_max_len:
            raise ServerConfigError(
                "max_tokens", f"must be >= prompt_max_len ({self.prompt_max_len})"
            )
        if not (0 < self.port < 65536):
            raise ServerConfigError("port", "must be a valid TCP port")


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("int", int):
        try:
            return int(raw)
        except ValueError:
            raise ServerConfigError(field.name, f"not an integer: {raw!r}")
    return raw


def load_server_config(
    config_path: Optional[Path] = None,
    env: Optional[dict] = None,
    overrides: Optional[dict] = None,
) -> ServerConfig:
    env = os.environ if env is None else env
    cfg = ServerConfig()
    known = {f.name: f for f in dataclasses.fields(ServerConfig)}
    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ServerConfigError(f"line {lineno}", f"expected key = value: {stripped!r}")
                key, _, value = stripped.partition("=")
                key = key.strip()
                if key not in known:
                    raise ServerConfigError(key, "unknown config key")
                setattr(cfg, key, _coerce(known[key], value.strip()))
    for name, f in known.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            setattr(cfg, name, _coerce(f, env[env_key]))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ServerConfigError(key, "unknown override")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg
