"""Run configuration, report payloads, and atomic artifact writers."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

COMMANDS = (
    "doubling",
    "bessel",
    "poincare",
    "spectrum",
    "heat",
    "harnack",
    "singular",
    "weyl",
    "stationary",
    "series",
    "simulate",
    "accept",
)

OUTPUT_DIR_ENV = "KIMURA_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one CLI run; echoed verbatim into the report."""

    command: str
    parameters: dict
    seed: int = 0
    output_dir: Path = Path(".")
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "jobs": self.jobs,
        }


@dataclass
class Report:
    """Numeric results of a run plus the resolved configuration that made them."""

    command: str
    params: dict
    results: dict
    pass_flag: bool | None  # None for report-only commands
    baselines: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return {
            "command": self.command,
            "config": self.params,
            "results": self.results,
            "pass": self.pass_flag,
            "baselines_consulted": self.baselines,
            "versions": self.versions,
        }


def toolkit_versions() -> dict:
    import numpy
    import scipy
    import sympy

    from importlib.metadata import version as pkg_version

    try:
        own = pkg_version("kimura-toolkit")
    except Exception:  # editable/dev checkouts without metadata
        own = "unknown"
    return {
        "kimura-toolkit": own,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


def load_config_file(path: str | Path) -> dict:
    """Parse a key = value config file with sections (TOML grammar)."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        # tomllib reports "... (at line L, column C)" in the message
        raise ConfigError(f"config parse error in {path}: {exc}") from exc


def resolve_parameters(
    command: str,
    schema: dict[str, type],
    file_config: dict,
    overrides: dict,
) -> dict:
    """Merge config-file section and CLI flags (flags win), rejecting unknown keys."""
    section = file_config.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section [{command}] must be a table")
    merged = dict(section)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    out = {}
    for key, value in merged.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for command {command!r}")
        want = schema[key]
        try:
            if want is float:
                out[key] = float(value)
            elif want is int:
                if isinstance(value, float) and value != int(value):
                    raise ValueError("not an integer")
                out[key] = int(value)
            elif want is bool:
                out[key] = bool(value)
            elif want is str:
                out[key] = str(value)
            elif want is list:
                if not isinstance(value, (list, tuple)):
                    raise ValueError("expected a list")
                out[key] = [float(v) for v in value]
            else:  # pragma: no cover - schema bug
                raise ConfigError(f"unsupported schema type for {key!r}")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {command}.{key}: {value!r} ({exc})") from exc
    return out


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", dir=path.parent, delete=False, encoding="utf-8", newline="\n"
    ) as fh:
        fh.write(text)
        tmp = fh.name
    os.replace(tmp, path)


def write_json_report(path: Path, report: Report) -> None:
    _atomic_write(path, json.dumps(report.payload(), indent=2, sort_keys=True, default=str) + "\n")


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    """Plain CSV with '.' decimals and '\\n' line endings, bit-stable via repr."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
