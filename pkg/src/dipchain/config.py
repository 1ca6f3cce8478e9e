"""Experiment configuration: JSON schema, defaults, sweeps and output headers.

Frequencies are given in MHz (ordinary frequency) and converted to rad/us
when a :class:`~dipchain.model.ChainConfig` is built.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
from pathlib import Path
from typing import Any, Iterator

import jsonschema
import numpy as np

from .model import ChainConfig

SWEEP_VARS = ("alpha", "inv_alpha", "L", "v_bar", "xi")

_NUM = {"type": "number"}
_SWEEP = {
    "type": "object",
    "properties": {
        "var": {"enum": list(SWEEP_VARS)},
        "values": {"type": "array", "items": _NUM, "minItems": 1},
        "range": {
            "type": "object",
            "properties": {
                "start": _NUM,
                "stop": _NUM,
                "num": {"type": "integer", "minimum": 1},
                "log": {"type": "boolean"},
            },
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    },
    "required": ["var"],
    "oneOf": [{"required": ["values"]}, {"required": ["range"]}],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "chain": {
            "type": "object",
            "properties": {
                "L": {"type": "integer", "minimum": 1},
                "omega0_mhz": _NUM,
                "delta_omega_mhz": {"type": "number", "not": {"const": 0}},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "J_mhz": _NUM,
                "A": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "integer", "minimum": 1},
                "omega_H_mhz": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "theta": _NUM,
            },
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "properties": {
                "xi": {"type": "number", "minimum": 0, "maximum": 1},
                "v": {"type": "number", "minimum": 0},
                "v_bar": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "sweep": {"oneOf": [_SWEEP, {"type": "array", "items": _SWEEP}, {"type": "null"}]},
        "method": {"enum": ["exact", "two_level"]},
        "phases": {"enum": ["aligned", "zero"]},
        "ensemble": {
            "type": "object",
            "properties": {
                "R": {"type": "integer", "minimum": 1},
                "realizations": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "displace": {
            "type": "object",
            "patternProperties": {"^[0-9]+$": _NUM},
            "additionalProperties": False,
        },
        "chain_spacing_nm": {"type": ["number", "string", "null"]},
        "T2_us": {"type": "number", "exclusiveMinimum": 0},
        "estimate": {
            "type": "object",
            "properties": {"k": {"type": ["integer", "null"], "minimum": 0}},
            "additionalProperties": False,
        },
        "fit": {
            "type": "object",
            "properties": {
                "input": {"type": ["string", "null"]},
                "p_col": {"type": "string"},
                "m_col": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULTS: dict[str, Any] = {
    "chain": {
        "L": 9,
        "omega0_mhz": 1000.0,
        "delta_omega_mhz": 141.0,
        "J_mhz": -52.0,
        "A": 2.2,
        "K": 1,
        "omega_H_mhz": None,
        "theta": math.pi / 2,
    },
    "noise": {"xi": 0.0, "v": 0.0, "v_bar": 0.0},
    "sweep": None,
    "method": "exact",
    "phases": "aligned",
    "ensemble": {"R": 1, "realizations": 1},
    "seed": 0,
    "displace": {},
    "chain_spacing_nm": None,
    "T2_us": 20.0,
    "estimate": {"k": None},
    "fit": {"input": None, "p_col": "P", "m_col": "M"},
}

HEADER_KEY = "config: "


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 2."""


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "displace":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))


def _read_text_config(text: str, origin: str) -> dict:
    """Parse JSON, or the ``# config:`` header of a previous output file."""
    stripped = text.lstrip()
    if stripped.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# " + HEADER_KEY):
                text = line[len("# " + HEADER_KEY):]
                break
        else:
            raise ConfigError(f"{origin}: no '# {HEADER_KEY}' header line found")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: top level must be a JSON object")
    if "command" in data and isinstance(data.get("config"), dict):
        # JSON output of an earlier run
        data = data["config"]
    return data


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Read, merge with defaults and validate an experiment config."""
    user: dict = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        user = _read_text_config(text, str(p))
    validate(user)
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    cfg["chain_spacing_nm"] = parse_spacing(cfg["chain_spacing_nm"])
    return cfg


def parse_spacing(value) -> float | None:
    if value is None:
        return None
    try:
        d = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"chain spacing must be a number or 'inf', got {value!r}") from None
    if not d > 0:
        raise ConfigError(f"chain spacing must be > 0, got {value!r}")
    return None if math.isinf(d) else d


def chain_config(cfg: dict, **updates) -> ChainConfig:
    """Build a ChainConfig; ``alpha`` (if set) overrides ``delta_omega_mhz``."""
    c = {**cfg["chain"], **updates}
    try:
        chain = ChainConfig.from_mhz(
            L=int(c["L"]),
            omega0_mhz=c["omega0_mhz"],
            delta_omega_mhz=c["delta_omega_mhz"],
            J_mhz=c["J_mhz"],
            A=c["A"],
            K=int(c["K"]),
            omega_H_mhz=c.get("omega_H_mhz"),
            theta=c["theta"],
        )
        if c.get("alpha") is not None:
            chain = chain.with_alpha(c["alpha"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return chain


def sweep_values(spec: dict) -> list[float]:
    if "values" in spec:
        vals = [float(v) for v in spec["values"]]
    else:
        r = spec["range"]
        gen = np.geomspace if r.get("log") else np.linspace
        if r.get("log") and (r["start"] <= 0 or r["stop"] <= 0):
            raise ConfigError("log range needs positive start and stop")
        vals = [float(v) for v in gen(r["start"], r["stop"], r["num"])]
    if spec["var"] == "L":
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError("sweep over L needs positive integers")
    if spec["var"] in ("alpha", "inv_alpha") and any(v <= 0 for v in vals):
        raise ConfigError(f"sweep over {spec['var']} needs positive values")
    return vals


def sweep_points(cfg: dict) -> Iterator[tuple[tuple[str, float], ...]]:
    """Cartesian grid of the configured sweeps; a single empty point if none."""
    spec = cfg.get("sweep")
    if spec is None:
        yield ()
        return
    specs = spec if isinstance(spec, list) else [spec]
    names = [s["var"] for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"sweep variables repeat: {names}")
    grids = [sweep_values(s) for s in specs]
    for combo in itertools.product(*grids):
        yield tuple(zip(names, combo))


def apply_point(cfg: dict, point) -> dict:
    """Copy of ``cfg`` with one sweep point written into the chain/noise fields."""
    out = copy.deepcopy(cfg)
    for name, value in point:
        if name == "alpha":
            out["chain"]["alpha"] = value
        elif name == "inv_alpha":
            out["chain"]["alpha"] = 1.0 / value
        elif name == "L":
            out["chain"]["L"] = int(value)
        else:
            out["noise"][name] = value
    return out


def header_lines(command: str, cfg: dict, extra: dict | None = None) -> list[str]:
    """Comment lines embedding the resolved config; the config line re-runs the file."""
    from . import __version__

    lines = [f"dipchain {__version__} command: {command}"]
    if extra:
        lines.append("info: " + json.dumps(extra, sort_keys=True))
    lines.append(HEADER_KEY + dump_config(cfg))
    return lines


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))
