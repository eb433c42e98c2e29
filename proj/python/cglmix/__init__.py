"""Python front end for the cglmix Monte Carlo lab.

Configs may be given as INI text, a path to an INI file, or a nested dict
such as ``{"grid": {"n": 256}, "run": {"seed": 3}}``; missing keys take the
library defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from . import _core
from ._core import (
    EXIT_BLOWUP,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    BlowUpError,
    ConfigError,
    git_blob_sha1,
    kinds,
    philox4x32_10,
    read_snapshot,
)

__all__ = [
    "BlowUpError",
    "ConfigError",
    "EXIT_BLOWUP",
    "EXIT_IO",
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_VALIDATION",
    "Result",
    "canonical_config",
    "config_hash",
    "config_text",
    "git_blob_sha1",
    "kinds",
    "ou_oracle",
    "philox4x32_10",
    "read_snapshot",
    "run",
    "simulate_path",
    "validate",
]


def _value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_value(x) for x in v)
    return str(v)


def config_text(config: str | os.PathLike | Mapping[str, Mapping[str, Any]] | None = None) -> str:
    """INI text for any accepted config form."""
    if config is None:
        return ""
    if isinstance(config, Mapping):
        lines = []
        for section, body in config.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {_value(v)}" for k, v in body.items())
            lines.append("")
        return "\n".join(lines)
    if isinstance(config, os.PathLike) or (isinstance(config, str) and "\n" not in config and os.path.isfile(config)):
        with open(config, encoding="utf-8") as fh:
            return fh.read()
    return str(config)


def _with_seed(text: str, seed: int | None) -> str:
    if seed is None:
        return text
    return config_text({**_sections(text), "run": {**_sections(text).get("run", {}), "seed": seed}})


def _sections(text: str) -> dict[str, dict[str, str]]:
    import configparser

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(_core.canonical_config(text))
    return {s: dict(cp[s]) for s in cp.sections()}


def canonical_config(config=None) -> str:
    return _core.canonical_config(config_text(config))


def config_hash(config=None) -> str:
    return _core.config_hash(config_text(config))


@dataclass
class Result:
    kind: str
    config_hash: str
    seed: int
    directory: str
    files: list[str]
    passed: bool | None
    wall_seconds: float
    report: dict = field(repr=False)


def run(config=None, kind: str | None = None, out: str = "runs", directory: str | None = None,
        workers: int = 1, seed: int | None = None) -> Result:
    """Runs one experiment and returns its record with the parsed report."""
    text = _with_seed(config_text(config), seed)
    r = _core.run(text, kind, out, directory, workers)
    return Result(r["kind"], r["config_hash"], r["seed"], r["directory"], list(r["files"]), r["pass"],
                  r["wall_seconds"], json.loads(r["report_json"]))


def validate(config=None, workers: int = 1) -> list[tuple[str, bool, str]]:
    return _core.validation_suite(config_text(config), workers)


def simulate_path(config=None, path: int = 0) -> dict:
    return _core.simulate_path(config_text(config), path)


def ou_oracle(config, j: int, t: float) -> tuple[complex, float]:
    return _core.ou_oracle(config_text(config), j, t)
