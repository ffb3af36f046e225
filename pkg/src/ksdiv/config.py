"""Run configuration: an INI-style ``key = value`` file with a schema version.

Example::

    [run]
    schema = 1
    model = pauli-rates
    t_max = 5

    [rates]
    gamma1 = constant 1
    gamma2 = constant 1
    gamma3 = tanh -1 1

Rate specs are a registry name followed by its parameters, or
``table <path>`` for a two-column ``t, gamma`` CSV (relative paths resolve
against the config file's directory).
"""
from __future__ import annotations

import configparser
import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .generators import RATE_REGISTRY, RateFunctions, tabulated

SCHEMA_VERSION = 1
MODELS = ("pauli-rates", "amplitude-damping", "custom-transfer")
MAP_KINDS = ("identity", "transposition", "diagonal", "transfer")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and field."""


@dataclass
class RunConfig:
    model: str
    rates: Optional[RateFunctions] = None
    damping: Optional[tuple] = None
    map_kind: str = "identity"
    transfer: Optional[np.ndarray] = None
    mode: str = "ks"
    at: float = 0.0
    t_max: float = 5.0
    grid: int = 101
    seed: int = 0
    budget: int = 2000
    witness: bool = False


@dataclass
class RegionScanConfig:
    resolution: int = 201
    slice: str = "plane"
    outputs: tuple = field(default=("csv", "svg"))

    def __post_init__(self):
        if self.resolution < 2:
            raise ConfigError(f"region.resolution must be at least 2, got {self.resolution}")
        if self.slice not in ("plane", "cube"):
            raise ConfigError(f"region.slice must be 'plane' or 'cube', got {self.slice!r}")
        bad = set(self.outputs) - {"csv", "svg"}
        if bad:
            raise ConfigError(f"region.outputs has unknown entries {sorted(bad)}")


class _Source:
    """Raw text kept around to point diagnostics at line numbers."""

    def __init__(self, path: Path, text: str):
        self.path = path
        self.lines = text.splitlines()

    def where(self, section: str, key: str) -> str:
        current = None
        for n, line in enumerate(self.lines, 1):
            head = re.match(r"\s*\[([^\]]+)\]", line)
            if head:
                current = head.group(1).strip()
            elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.I):
                return f"{self.path}:{n}: [{section}] {key}"
        return f"{self.path}: [{section}] {key}"


def _number(src: _Source, section: str, key: str, raw: str, kind=float):
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{src.where(section, key)}: expected {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{src.where(section, key)}: value must be finite")
    return value


def _floats(src, section, key, raw) -> list[float]:
    return [_number(src, section, key, tok) for tok in raw.replace(",", " ").split()]


def read_rate_table(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``t, gamma`` CSV; a non-numeric first row is taken as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed rate table ({exc})") from None
    if data.shape[0] < 2:
        raise ConfigError(f"{path}: rate table needs at least two rows")
    return data[:, 0], data[:, 1]


def _rate(src: _Source, key: str, raw: str):
    parts = raw.split()
    if not parts:
        raise ConfigError(f"{src.where('rates', key)}: empty rate specification")
    name, args = parts[0].lower(), parts[1:]
    if name == "table":
        if len(args) != 1:
            raise ConfigError(f"{src.where('rates', key)}: 'table' takes one path")
        path = Path(args[0])
        if not path.is_absolute():
            path = src.path.parent / path
        if not path.exists():
            raise ConfigError(f"{src.where('rates', key)}: rate table {path} does not exist")
        try:
            return tabulated(*read_rate_table(path))
        except ValueError as exc:
            raise ConfigError(f"{src.where('rates', key)}: {exc}") from None
    if name not in RATE_REGISTRY:
        raise ConfigError(f"{src.where('rates', key)}: unknown rate {name!r} "
                          f"(known: {', '.join(sorted(RATE_REGISTRY))}, table)")
    values = [_number(src, "rates", key, a) for a in args]
    try:
        return RATE_REGISTRY[name](*values)
    except TypeError:
        raise ConfigError(f"{src.where('rates', key)}: wrong number of parameters for {name!r}") from None


DAMPING_KINDS = {"exponential": 2, "jaynes-cummings": 2}


def load_config(path) -> tuple[RunConfig, RegionScanConfig]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text()
    src = _Source(path, text)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]
    if "schema" not in run:
        raise ConfigError(f"{src.where('run', 'schema')}: schema version is required")
    schema = _number(src, "run", "schema", run["schema"], int)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"{src.where('run', 'schema')}: unsupported schema {schema} "
                          f"(expected {SCHEMA_VERSION})")
    known = {"schema", "model", "t_max", "grid", "seed", "budget", "witness"}
    for key in run:
        if key not in known:
            raise ConfigError(f"{src.where('run', key)}: unknown field")
    model = run.get("model", "pauli-rates").strip()
    if model not in MODELS:
        raise ConfigError(f"{src.where('run', 'model')}: model must be one of {', '.join(MODELS)}")
    cfg = RunConfig(model=model)
    if "t_max" in run:
        cfg.t_max = _number(src, "run", "t_max", run["t_max"])
        if cfg.t_max <= 0:
            raise ConfigError(f"{src.where('run', 't_max')}: must be positive")
    for key in ("grid", "seed", "budget"):
        if key in run:
            setattr(cfg, key, _number(src, "run", key, run[key], int))
    if cfg.grid < 2 or cfg.budget < 1 or cfg.seed < 0:
        raise ConfigError(f"{path}: [run] needs grid >= 2, budget >= 1, seed >= 0")
    if "witness" in run:
        try:
            cfg.witness = run.getboolean("witness")
        except ValueError:
            raise ConfigError(f"{src.where('run', 'witness')}: expected a boolean") from None

    if model == "pauli-rates":
        if not parser.has_section("rates"):
            raise ConfigError(f"{path}: model pauli-rates needs a [rates] section")
        rates = parser["rates"]
        missing = [k for k in ("gamma1", "gamma2", "gamma3") if k not in rates]
        if missing:
            raise ConfigError(f"{path}: [rates] is missing {', '.join(missing)}")
        cfg.rates = RateFunctions(tuple(_rate(src, k, rates[k]) for k in ("gamma1", "gamma2", "gamma3")))
    elif model == "amplitude-damping":
        if not parser.has_section("damping") or "G" not in parser["damping"]:
            raise ConfigError(f"{path}: model amplitude-damping needs [damping] G = <kind> <params>")
        parts = parser["damping"]["G"].split()
        kind = parts[0].lower() if parts else ""
        if kind not in DAMPING_KINDS:
            raise ConfigError(f"{src.where('damping', 'G')}: unknown G kind {kind!r} "
                              f"(known: {', '.join(DAMPING_KINDS)})")
        params = [_number(src, "damping", "G", a) for a in parts[1:]]
        if len(params) != DAMPING_KINDS[kind]:
            raise ConfigError(f"{src.where('damping', 'G')}: {kind} takes {DAMPING_KINDS[kind]} parameters")
        cfg.damping = (kind, *params)

    if parser.has_section("map"):
        sec = parser["map"]
        cfg.map_kind = sec.get("kind", "identity").strip()
        if cfg.map_kind not in MAP_KINDS:
            raise ConfigError(f"{src.where('map', 'kind')}: kind must be one of {', '.join(MAP_KINDS)}")
        if cfg.map_kind == "diagonal":
            q = _floats(src, "map", "q", sec.get("q", ""))
            if len(q) != 3:
                raise ConfigError(f"{src.where('map', 'q')}: need three numbers")
            cfg.transfer = np.diag([1.0, *q])
        elif cfg.map_kind == "transfer":
            m = _floats(src, "map", "transfer", sec.get("transfer", ""))
            if len(m) != 16:
                raise ConfigError(f"{src.where('map', 'transfer')}: need 16 numbers (row-major 4x4)")
            cfg.transfer = np.array(m).reshape(4, 4)
        cfg.mode = sec.get("mode", "ks").strip()
        if cfg.mode not in ("ks", "ks2"):
            raise ConfigError(f"{src.where('map', 'mode')}: mode must be ks or ks2")
    if parser.has_section("witness") and "at" in parser["witness"]:
        cfg.at = _number(src, "witness", "at", parser["witness"]["at"])
    if model == "custom-transfer" and cfg.map_kind == "identity" and not parser.has_section("map"):
        raise ConfigError(f"{path}: model custom-transfer needs a [map] section")

    region = RegionScanConfig()
    if parser.has_section("region"):
        sec = parser["region"]
        if "resolution" in sec:
            region.resolution = _number(src, "region", "resolution", sec["resolution"], int)
        if "slice" in sec:
            region.slice = sec["slice"].strip()
        if "outputs" in sec:
            region.outputs = tuple(o.strip() for o in sec["outputs"].split(",") if o.strip())
        region.__post_init__()
    return cfg, region
