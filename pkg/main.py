#!/usr/bin/env python3
"""Thin entrypoint for cgl."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Sequence

from rgw_cli_contract import AppSpec, resolve_install_script_path, run_app

from _version import __version__

INSTALL_SCRIPT = resolve_install_script_path(__file__)
CONFIG_BOOTSTRAP_TEXT = """{
  "output_dir": "",
  "threads": 0,
  "log_level": "WARNING"
}
"""
HELP_TEXT = """cgl

flags:
  cgl -h
    show this help
  cgl -v
    print the installed version
  cgl -u
    reinstall from the source checkout when its version changed
  cgl conf
    open config in $VISUAL/$EDITOR

features:
  derived constants and discretization-error orders of the implicit Euler scheme
  # cgl constants | cgl error-order [--config <path>] [--seed <u64>] [--out <prefix>]
  cgl constants
  cgl error-order --config p0.cfg --out runs/order

  attractor clouds and convergence sweeps over eps, truncation m and noise a
  # cgl attractor | cgl sweep-eps | cgl sweep-m | cgl sweep-noise
  cgl attractor --seed 7
  cgl sweep-m --config p0.cfg --format csv

  Ornstein-Uhlenbeck statistics and the random absorbing radius
  # cgl ou-stats | cgl radius
  cgl ou-stats
  cgl radius --seed 3
"""

COMMANDS = {
    "constants",
    "error-order",
    "attractor",
    "sweep-eps",
    "sweep-m",
    "sweep-noise",
    "ou-stats",
    "radius",
}
COMMAND_FLAGS = {"--config", "--seed", "--out", "--format"}


class UsageError(ValueError):
    """Raised for invalid CLI usage."""


def _config_path() -> Path:
    from config import config_file_path

    return config_file_path()


def _print_help() -> None:
    print(HELP_TEXT)


def _parse_seed(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise UsageError("--seed must be an integer") from exc
    if value < 0 or value >= 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return value


def _parse_command_flags(
    args: Sequence[str], *, allowed: set[str]
) -> dict[str, str]:
    parsed: dict[str, str] = {}
    idx = 0
    while idx < len(args):
        key = args[idx]
        if not key.startswith("-"):
            raise UsageError(f"Unexpected argument '{key}'")
        if key not in allowed:
            raise UsageError(f"Unknown flag '{key}'")
        if key in parsed:
            raise UsageError(f"{key} given more than once")
        idx += 1
        if idx >= len(args):
            raise UsageError(f"{key} requires a value")
        parsed[key] = args[idx]
        idx += 1
    return parsed


def parse_args(
    argv: Sequence[str],
) -> tuple[str | None, dict[str, str]]:
    if not argv:
        return None, {}
    if argv[0] == "conf":
        return "conf", {}
    if argv[0] not in COMMANDS:
        raise UsageError(f"Unknown command '{argv[0]}'")
    flags = _parse_command_flags(argv[1:], allowed=COMMAND_FLAGS)
    if flags.get("--format", "csv") != "csv":
        raise UsageError("--format only supports csv")
    return argv[0], flags


def _dispatch(argv: list[str]) -> int:
    from models import LatticeError
    from orchestrator import Orchestrator
    from run_config import RunConfig, load_run_config
    from store import StorageError

    try:
        command, flags = parse_args(argv)
    except UsageError as exc:
        print(str(exc))
        return 1

    if command == "conf":
        print("Usage: cgl conf")
        return 1
    if command is None:
        _print_help()
        return 0

    try:
        if "--config" in flags:
            run_config = load_run_config(Path(flags["--config"]).expanduser())
        else:
            run_config = RunConfig()
        if "--seed" in flags:
            run_config = run_config.with_seed(_parse_seed(flags["--seed"]))
        if "--out" in flags:
            run_config = run_config.with_prefix(flags["--out"])
        return Orchestrator(run_config).run_cli(command)
    except UsageError as exc:
        print(str(exc))
        return 1
    except (LatticeError, StorageError) as exc:
        print(str(exc))
        return 1


APP_SPEC = AppSpec(
    app_name="cgl",
    version=__version__,
    help_text=HELP_TEXT,
    install_script_path=INSTALL_SCRIPT,
    no_args_mode="help",
    config_path_factory=_config_path,
    config_bootstrap_text=CONFIG_BOOTSTRAP_TEXT,
)


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    return run_app(APP_SPEC, args, _dispatch)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(130)
