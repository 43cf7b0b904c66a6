"""Flat ``key=value`` run configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Optional

ENV_VAR = "GECW_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # scorer
    beta: float = 0.5
    max_merge_span: int = 4
    selection: str = "running"
    case_half_cost: bool = True
    label_map: Optional[str] = None
    # language model / spelling
    order: int = 3
    lm_model: Optional[str] = None
    replacement_list: Optional[str] = None
    max_edit_distance_oov: int = 2
    max_edit_distance_vocab: int = 1
    distance_penalty: float = 4.0
    margin: float = 2.0
    protect: bool = True
    # synthetic errors
    synth_profile: Optional[str] = None
    seed: int = 0
    intensity: float = 1.0
    # word-order detector
    wo_threshold: float = 0.05
    wo_min_support: int = 10
    wo_mode: str = "conditional"
    wo_allowlist: Optional[str] = None
    # execution
    jobs: int = 1

    @classmethod
    def parse(cls, text: str) -> "Config":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep:
                raise ConfigError(f"config line {lineno}: expected key=value")
            if key not in types:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _convert(key, val, types[key])
        return cls(**values)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "Config":
        path = path or os.environ.get(ENV_VAR)
        if not path:
            return cls()
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


def _convert(key: str, val: str, typ: str):
    base = typ.replace("Optional[", "").rstrip("]")
    try:
        if base == "bool":
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        if base == "int":
            return int(val)
        if base == "float":
            return float(val)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {val!r}") from None
    return val or None
