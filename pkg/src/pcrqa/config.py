"""Pipeline configuration with file, environment, and flag layering.

Precedence: flags > PCR_* environment variables > config file > defaults.
The config file is plain `key = value` lines with # comments; list values
are comma-separated.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

ENV_PREFIX = "PCR_"


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field {field}: {message}")
        self.field = field


@dataclass
class PipelineConfig:
    # paths
    dump: str = ""
    knowledge_file: str = ""  # empty selects the bundled base
    out_dir: str = "artifacts"
    # thresholds
    necessity_threshold: int = 4
    rare_tag_theta: int = 50
    # lengths
    max_len: int = 300
    prefix_len: int = 50
    code_len: int = 150
    tag_mask_count: int = 3
    # model
    backend: str = "builtin"  # "builtin" or an http(s) endpoint
    embedding_dim: int = 64
    learning_rate: float = 1e-5
    epochs: int = 6
    batch_size: int = 4
    seed: int = 0
    top_k: int = 10
    # eval
    k_set: tuple = (3, 5, 10)
    folds: int = 10
    fold: int = 0
    split: str = "test"  # train | val | test
    # execution
    jobs: int = 1
    post_types: str = "1"

    def validate(self) -> None:
        for name in ("max_len", "prefix_len", "code_len", "tag_mask_count",
                     "embedding_dim", "batch_size", "top_k", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.necessity_threshold < 0:
            raise ConfigError("necessity_threshold", "must be >= 0")
        if self.rare_tag_theta < 1:
            raise ConfigError("rare_tag_theta", "must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate", "must be > 0")
        if self.folds < 2:
            raise ConfigError("folds", "must be >= 2")
        if not (0 <= self.fold < self.folds):
            raise ConfigError("fold", f"must be in [0, {self.folds})")
        if self.split not in ("train", "val", "test", "all"):
            raise ConfigError("split", "must be train, val, test, or all")
        if self.backend != "builtin" and not self.backend.startswith(("http://", "https://")):
            raise ConfigError("backend", "must be 'builtin' or an http(s) URL")
        if not self.k_set or any(k < 1 for k in self.k_set):
            raise ConfigError("k_set", "must be non-empty positive integers")

    def hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _coerce(field: dataclasses.Field, raw: str):
    name = field.name
    if field.type in ("int", int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(name, f"not an integer: {raw!r}")
    if field.type in ("float", float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(name, f"not a number: {raw!r}")
    if field.type in ("tuple", tuple):
        try:
            return tuple(int(part) for part in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(name, f"not a comma-separated integer list: {raw!r}")
    return raw


def parse_config_file(path: Path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}", f"expected key = value: {stripped!r}")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def load_config(
    config_path: Optional[Path] = None,
    env: Optional[dict] = None,
    overrides: Optional[dict] = None,
) -> PipelineConfig:
    env = os.environ if env is None else env
    file_values = parse_config_file(config_path) if config_path else {}
    cfg = PipelineConfig()
    known = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    for key, raw in file_values.items():
        if key not in known:
            raise ConfigError(key, "unknown config key")
        setattr(cfg, key, _coerce(known[key], raw))
    for name, f in known.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            setattr(cfg, name, _coerce(f, env[env_key]))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(key, "unknown override")
        setattr(cfg, key, value if not isinstance(value, str) else _coerce(known[key], value))
    cfg.validate()
    return cfg
