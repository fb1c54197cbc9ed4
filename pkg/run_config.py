#!/usr/bin/env python3
"""Parsing and formatting of flat ``key = value`` experiment configs."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np

from models import (
    VARIANTS,
    CloudRecipe,
    ConfigError,
    ModelParams,
    ValidationError,
    force_from_entries,
)

_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"^([+-]?{_NUMBER})(?:\s*([+-])\s*({_NUMBER})\s*i)?$")
_IMAG_RE = re.compile(rf"^([+-]?{_NUMBER})\s*i$")
_LINE_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.\-]*)\s*=\s*(.*)$")
_G_ENTRY_RE = re.compile(r"^g\.([+-]?\d+)$")

AUTO = "auto"
CLI_CONTRACTION = 1e14


@dataclass(frozen=True)
class RunKnobs:
    seed: int = 0
    eps: Optional[float] = None
    T: float = 1.0
    samples: int = 4
    substeps: int = 100
    eps_exponents: Tuple[int, ...] = (4, 5, 6, 7, 8, 9)
    variant: str = "ies"
    m: int = 16
    a: float = 0.0
    tail_site: int = 32
    sweep_eps_exponents: Tuple[int, ...] = (2, 3, 4, 5, 6)
    m_grid: Tuple[int, ...] = (4, 8, 16, 32)
    a_grid: Tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    ou_dt: float = 1.0
    ou_samples: int = 1_000_000
    growth_horizons: Tuple[float, ...] = (100.0, 1000.0, 10000.0)
    radius_dt: float = 0.01
    radius_paths: int = 100
    radius_a_grid: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.2)


@dataclass(frozen=True)
class SweepSettings:
    slack: float = 0.1
    floor: float = 1e-6


@dataclass(frozen=True)
class OutputSettings:
    prefix: str = ""
    format: Literal["csv"] = "csv"
    dump_cloud: bool = False
    timings: bool = False


def _cli_recipe() -> CloudRecipe:
    return CloudRecipe(contraction=CLI_CONTRACTION)


@dataclass(frozen=True, eq=False)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams.reference)
    run: RunKnobs = field(default_factory=RunKnobs)
    recipe: CloudRecipe = field(default_factory=_cli_recipe)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def with_seed(self, seed: int) -> "RunConfig":
        if seed < 0 or seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", field="run.seed")
        return replace(self, run=replace(self.run, seed=seed))

    def with_prefix(self, prefix: str) -> "RunConfig":
        return replace(self, output=replace(self.output, prefix=prefix))


def parse_complex(text: str) -> complex:
    raw = text.strip().replace(" ", "")
    match = _COMPLEX_RE.match(raw)
    if match:
        real = float(match.group(1))
        imag = 0.0
        if match.group(2):
            imag = float(match.group(3))
            if match.group(2) == "-":
                imag = -imag
        return complex(real, imag)
    match = _IMAG_RE.match(raw)
    if match:
        return complex(0.0, float(match.group(1)))
    raise ValueError(f"'{text}' is not a complex number of the form re+imi")


def format_complex(value: complex) -> str:
    real = float(value.real)
    imag = float(value.imag)
    sign = "-" if math.copysign(1.0, imag) < 0 else "+"
    return f"{real!r}{sign}{abs(imag)!r}i"


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    return value


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], Tuple[Any, ...]]:
    def parse(text: str) -> Tuple[Any, ...]:
        parts = [part.strip() for part in text.split(",") if part.strip()]
        if not parts:
            raise ValueError("grid must not be empty")
        return tuple(item(part) for part in parts)

    return parse


def _parse_optional(item: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if text.lower() == AUTO else item(text)

    return parse


def _format_value(value: Any) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(item) for item in value)
    return str(value)


def _parse_str(text: str) -> str:
    return text


# config key -> (ModelParams attribute, parser)
_MODEL_KEYS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "lambda": ("lam", _parse_float),
    "mu": ("mu", _parse_float),
    "gamma": ("gamma", _parse_float),
    "beta": ("beta", _parse_float),
    "k": ("k", _parse_float),
    "nu": ("nu", _parse_float),
    "p": ("p", _parse_float),
    "eta": ("eta", _parse_float),
    "window": ("window", _parse_int),
}

_SECTION_PARSERS: Dict[str, Dict[str, Callable[[str], Any]]] = {
    "run": {
        "seed": _parse_int,
        "eps": _parse_optional(_parse_float),
        "T": _parse_float,
        "samples": _parse_int,
        "substeps": _parse_int,
        "eps_exponents": _parse_list(_parse_int),
        "variant": _parse_str,
        "m": _parse_int,
        "a": _parse_float,
        "tail_site": _parse_int,
        "sweep_eps_exponents": _parse_list(_parse_int),
        "m_grid": _parse_list(_parse_int),
        "a_grid": _parse_list(_parse_float),
        "ou_dt": _parse_float,
        "ou_samples": _parse_int,
        "growth_horizons": _parse_list(_parse_float),
        "radius_dt": _parse_float,
        "radius_paths": _parse_int,
        "radius_a_grid": _parse_list(_parse_float),
    },
    "recipe": {
        "n_init": _parse_int,
        "burn_in": _parse_optional(_parse_int),
        "collect": _parse_int,
        "sampler": _parse_str,
        "contraction": _parse_float,
    },
    "sweep": {
        "slack": _parse_float,
        "floor": _parse_float,
    },
    "output": {
        "prefix": _parse_str,
        "format": _parse_str,
        "dump_cloud": _parse_bool,
        "timings": _parse_bool,
    },
}

_SECTION_TYPES = {
    "run": RunKnobs,
    "recipe": CloudRecipe,
    "sweep": SweepSettings,
    "output": OutputSettings,
}


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    return re.split(r"\s#", line, maxsplit=1)[0].strip()


def read_force_file(path: Path) -> Dict[int, complex]:
    """Read a two-column ``index complex`` force file."""

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read force file {path}: {exc}", field="g.file") from exc
    entries: Dict[int, complex] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"{path.name} line {number}: expected 'index complex'", field="g.file")
        try:
            entries[int(parts[0])] = parse_complex(parts[1])
        except ValueError as exc:
            raise ConfigError(f"{path.name} line {number}: {exc}", field="g.file") from exc
    return entries


def parse_run_config(text: str, *, base_dir: Optional[Path] = None) -> RunConfig:
    """Parse config text; every key is optional and defaults to the reference set P0."""

    seen: Dict[str, int] = {}
    model: Dict[str, Any] = {}
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in _SECTION_PARSERS}
    g_entries: Dict[int, complex] = {}
    g_file: Optional[Tuple[Path, int]] = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        match = _LINE_RE.match(line)
        if not match:
            raise ConfigError("expected 'key = value'", line=number)
        key, value = match.group(1), match.group(2).strip()
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", line=number, field=key)
        seen[key] = number
        if not value and key != "output.prefix":
            raise ConfigError("missing value", line=number, field=key)
        try:
            if key in _MODEL_KEYS:
                attribute, parser = _MODEL_KEYS[key]
                model[attribute] = parser(value)
            elif key == "g.file":
                file_path = Path(value).expanduser()
                if not file_path.is_absolute() and base_dir is not None:
                    file_path = base_dir / file_path
                g_file = (file_path, number)
            elif _G_ENTRY_RE.match(key):
                g_entries[int(_G_ENTRY_RE.match(key).group(1))] = parse_complex(value)
            else:
                section, _, name = key.partition(".")
                parsers = _SECTION_PARSERS.get(section)
                if parsers is None or name not in parsers:
                    raise ConfigError("unknown key", line=number, field=key)
                sections[section][name] = parsers[name](value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), line=number, field=key) from exc

    window = model.get("window", ModelParams.window)
    entries: Dict[int, complex] = {}
    if g_file is not None:
        entries.update(read_force_file(g_file[0]))
    entries.update(g_entries)
    try:
        if g_file is None and not g_entries:
            params = ModelParams.reference(window=window, **{k: v for k, v in model.items() if k != "window"})
        else:
            params = ModelParams(g=force_from_entries(entries, window), **model)
    except ValidationError as exc:
        field_name = _field_for_message(str(exc))
        raise ConfigError(str(exc), line=seen.get(field_name), field=field_name) from exc

    built: Dict[str, Any] = {}
    for section, values in sections.items():
        try:
            if section == "recipe":
                values = {"contraction": CLI_CONTRACTION, **values}
            built[section] = _SECTION_TYPES[section](**values)
        except ValidationError as exc:
            raise ConfigError(str(exc), field=section) from exc
    config = RunConfig(params=params, **built)
    _validate(config, seen)
    return config


def _field_for_message(message: str) -> str:
    lowered = message.lower()
    if "gamma" in lowered:
        return "gamma"
    for key in ("lambda", "mu", "beta", "nu", "eta", "window", "k", "p"):
        if lowered.startswith(key):
            return key
    return "g"


def _strictly(values: Iterable[float], increasing: bool) -> bool:
    items = list(values)
    pairs = zip(items, items[1:])
    return all((b > a) if increasing else (b < a) for a, b in pairs)


def _validate(config: RunConfig, seen: Dict[str, int]) -> None:
    run = config.run
    window = config.params.window

    def fail(key: str, message: str) -> None:
        raise ConfigError(message, line=seen.get(key), field=key)

    if run.seed < 0 or run.seed >= 2**64:
        fail("run.seed", "seed must be an unsigned 64-bit integer")
    if run.eps is not None and run.eps <= 0:
        fail("run.eps", "eps must be > 0")
    if run.T <= 0:
        fail("run.T", "T must be > 0")
    if run.samples < 1:
        fail("run.samples", "samples must be >= 1")
    if run.substeps < 1:
        fail("run.substeps", "substeps must be >= 1")
    if run.variant not in VARIANTS:
        fail("run.variant", f"unknown variant '{run.variant}'; expected one of: {', '.join(VARIANTS)}")
    if run.m < 1 or 4 * run.m > window:
        fail("run.m", f"m must satisfy 1 <= m and 4*m <= window ({window})")
    if not 0 <= run.a <= 1:
        fail("run.a", "a must lie in [0, 1]")
    if run.tail_site < 0:
        fail("run.tail_site", "tail_site must be >= 0")
    for key, grid, increasing in (
        ("run.eps_exponents", run.eps_exponents, True),
        ("run.sweep_eps_exponents", run.sweep_eps_exponents, True),
        ("run.m_grid", run.m_grid, True),
        ("run.a_grid", run.a_grid, False),
        ("run.growth_horizons", run.growth_horizons, True),
        ("run.radius_a_grid", run.radius_a_grid, True),
    ):
        if not grid:
            fail(key, "grid must not be empty")
        if not _strictly(grid, increasing):
            direction = "increasing" if increasing else "decreasing"
            fail(key, f"grid must be strictly {direction} toward its limit")
    if min(run.eps_exponents) < 0 or min(run.sweep_eps_exponents) < 0:
        fail("run.eps_exponents", "exponents must be >= 0")
    if min(run.m_grid) < 1 or 4 * max(run.m_grid) > window:
        fail("run.m_grid", f"m values must satisfy 1 <= m and 4*m <= window ({window})")
    if not all(0 < a <= 1 for a in run.a_grid):
        fail("run.a_grid", "noise intensities must lie in (0, 1]")
    if not all(0 <= a <= 1 for a in run.radius_a_grid):
        fail("run.radius_a_grid", "noise intensities must lie in [0, 1]")
    if min(run.growth_horizons) <= 0:
        fail("run.growth_horizons", "horizons must be > 0")
    if run.ou_dt <= 0 or run.radius_dt <= 0:
        fail("run.ou_dt" if run.ou_dt <= 0 else "run.radius_dt", "time steps must be > 0")
    if run.ou_samples < 2:
        fail("run.ou_samples", "ou_samples must be >= 2")
    if max(run.growth_horizons) > run.ou_samples * run.ou_dt:
        fail("run.growth_horizons", "horizons must not exceed ou_samples * ou_dt")
    if run.radius_paths < 1:
        fail("run.radius_paths", "radius_paths must be >= 1")
    if config.sweep.slack < 0 or config.sweep.floor < 0:
        fail("sweep.slack" if config.sweep.slack < 0 else "sweep.floor", "must be >= 0")
    if config.output.format != "csv":
        fail("output.format", "only csv output is supported")


def format_run_config(config: RunConfig) -> str:
    """Render a config so that parsing it back gives the same config."""

    params = config.params
    lines: List[str] = ["# cgl experiment config"]
    for key, (attribute, _) in _MODEL_KEYS.items():
        lines.append(f"{key} = {_format_value(getattr(params, attribute))}")
    window = params.window
    nonzero = np.flatnonzero(params.g)
    if nonzero.size == 0:
        lines.append(f"g.0 = {format_complex(0j)}")
    for index in nonzero:
        lines.append(f"g.{int(index) - window} = {format_complex(complex(params.g[index]))}")
    for section, section_type in _SECTION_TYPES.items():
        values = getattr(config, section)
        for item in fields(section_type):
            if item.name in _SECTION_PARSERS[section]:
                lines.append(f"{section}.{item.name} = {_format_value(getattr(values, item.name))}")
    return "\n".join(lines) + "\n"


def load_run_config(path: Path) -> RunConfig:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_run_config(text, base_dir=path.parent)


__all__ = [
    "CLI_CONTRACTION",
    "OutputSettings",
    "RunConfig",
    "RunKnobs",
    "SweepSettings",
    "format_complex",
    "format_run_config",
    "load_run_config",
    "parse_complex",
    "parse_run_config",
    "read_force_file",
]
