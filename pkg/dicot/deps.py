"""Shared command-line option types and the config resolution they feed."""
from pathlib import Path
from typing import Annotated, Any, Optional

import typer

from .core.config import RunConfig, load_run_config, parse_assignments
from .exceptions import ConfigError

ConfigOpt = Annotated[
    Optional[Path],
    typer.Option("--config", help="key = value run config (see --help config)"),
]
SetOpt = Annotated[
    Optional[list[str]],
    typer.Option("--set", help="override one config key, key=value (repeatable)"),
]
SeedsOpt = Annotated[
    Optional[str],
    typer.Option("--seeds", help="comma-separated evaluation seeds [default: config seeds, 1,2,3,4,5]"),
]
OutOpt = Annotated[
    Optional[Path],
    typer.Option("--out", help="output CSV [default: stdout]"),
]
ChannelsOpt = Annotated[
    Optional[str],
    typer.Option("--channels", help="comma-separated channel indices to keep, e.g. 0,1,2"),
]


def int_list(value: Optional[str], flag: str = "list") -> Optional[list[int]]:
    if value is None:
        return None
    try:
        items = [int(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected comma-separated integers, got {value!r}") from exc
    if not items:
        raise ConfigError(f"{flag}: empty list")
    return items


def run_config(config: Optional[Path], assignments: Optional[list[str]], **flags: Any) -> RunConfig:
    """Resolve preset < file < --set < explicit flags (unset flags are None and ignored)."""
    overrides: dict[str, Any] = parse_assignments(assignments)
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return load_run_config(config, overrides)
