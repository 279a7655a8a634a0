"""YAML run configurations for the command-line recipes."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import InvalidConfigError

COMMANDS = ("spectrum", "pump", "relax", "holeburn", "lifetime", "echo", "fit")
TOP_LEVEL_KEYS = {"command", "seed", "scheme", "output", "name", *COMMANDS}


@dataclass
class RunConfig:
    """One figure recipe: a command, its parameter section and shared settings.

    ``params`` holds the section named after the command; ``scheme`` holds
    level-scheme overrides passed to :func:`ersim.levels.build_level_scheme`.
    Relative input paths are resolved against ``base_dir``.
    """

    command: str
    params: dict[str, Any] = dc_field(default_factory=dict)
    scheme: dict[str, Any] = dc_field(default_factory=dict)
    seed: int = 0
    name: str = ""
    out_dir: Path | None = None
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidConfigError("seed must be a non-negative integer")
        self.name = self.name or self.command

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def input_path(self, value) -> Path:
        p = Path(value)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise InvalidConfigError(f"input file not found: {p}")
        return p


def _mapping(value, what: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise InvalidConfigError(f"{what} must be a mapping")
    return dict(value)


def config_from_mapping(raw: Mapping | None, *, command: str | None = None,
                        base_dir: Path = Path(".")) -> RunConfig:
    raw = _mapping(raw, "config")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cmd = command or raw.get("command")
    if not cmd:
        raise InvalidConfigError("no command given")
    if command and raw.get("command") and raw["command"] != command:
        raise InvalidConfigError(f"config is for {raw['command']!r}, not {command!r}")
    out = _mapping(raw.get("output"), "output")
    return RunConfig(command=cmd, params=_mapping(raw.get(cmd), cmd),
                     scheme=_mapping(raw.get("scheme"), "scheme"), seed=raw.get("seed", 0),
                     name=str(raw.get("name", "")),
                     out_dir=Path(out["dir"]) if out.get("dir") else None, base_dir=base_dir)


def load_config(path, *, command: str | None = None) -> RunConfig:
    """Parse a YAML file; syntax errors surface as :class:`InvalidConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InvalidConfigError(f"config file not found: {path}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    if raw is None:
        raise InvalidConfigError(f"{path}: empty config")
    return config_from_mapping(raw, command=command, base_dir=path.parent)
