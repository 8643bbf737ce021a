"""Flat ``key = value`` config files.

Blank lines and ``#`` comments are ignored.  Keys are :class:`TrainConfig`
field names; an unknown key is an error so typos never pass silently.  The
special key ``preset`` picks a named base configuration.
"""

from __future__ import annotations

import dataclasses
import typing

from ..errors import ContractError
from ..trainer import TrainConfig, named_config

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _field_types():
    hints = typing.get_type_hints(TrainConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(TrainConfig)}


def parse_value(key, raw, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        return raw
    except ValueError:
        raise ContractError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text, source="<config>"):
    """Return ``(preset_or_None, overrides)`` from config-file text."""
    types = _field_types()
    preset, values = None, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "preset":
            preset = raw
            continue
        if key not in types:
            raise ContractError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ContractError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = parse_value(key, raw, types[key])
    return preset, values


def load_config(path=None, base=None, **overrides):
    """Build a TrainConfig from ``base`` (or the file's preset), file values,
    then keyword overrides, in that order of precedence."""
    preset, values = (None, {}) if path is None else parse_config_text(open(path).read(), str(path))
    if base is None:
        base = named_config(preset) if preset else TrainConfig()
    elif preset:
        base = named_config(preset)
    merged = {**values, **{k: v for k, v in overrides.items() if v is not None}}
    return dataclasses.replace(base, **merged)


def dump_config(config: TrainConfig):
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
