"""Flat ``section.key = value`` configuration files.

One assignment per line; ``#`` starts a comment. Values are numbers,
``true``/``false``, ``none``, bare strings, or lists ``[a, b, c]``. Every
key not given keeps its default. ``format_config`` prints every key, so
``parse_config(format_config(parse_config(text)))`` equals
``parse_config(text)``.
"""

from __future__ import annotations

import dataclasses
import re

from .channel import ScenarioConfig
from .gamp import GampConfig
from .harness import ExperimentConfig, HarnessConfig, ProtocolConfig, SweepConfig

SECTIONS = {
    "scenario": ScenarioConfig,
    "protocol": ProtocolConfig,
    "gamp": GampConfig,
    "harness": HarnessConfig,
    "sweep": SweepConfig,
}

_LINE = re.compile(r"^([A-Za-z_]\w*)\.([A-Za-z_]\w*)\s*=\s*(.*)$")


class ConfigError(ValueError):
    def __init__(self, message, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "'\"":
        return t[1:-1]
    return t


def parse_value(text: str):
    t = text.strip()
    if t.startswith("["):
        if not t.endswith("]"):
            raise ValueError(f"unterminated list {t!r}")
        inner = t[1:-1].strip()
        return [] if not inner else [_scalar(p) for p in inner.split(",")]
    return _scalar(t)


def _coerce(value, annotation: str, key: str, line: int):
    ann = annotation.replace(" ", "")
    optional = "None" in ann.split("|")
    if value is None:
        if optional:
            return None
        raise ConfigError("value may not be none", line, key)
    base = [a for a in ann.split("|") if a != "None"][0]
    try:
        if base.startswith(("list[", "tuple[")):
            if not isinstance(value, list):
                raise ConfigError(f"expected a list, got {value!r}", line, key)
            inner = base[base.index("[") + 1:-1].split(",")[0]
            items = [_coerce(v, inner, key, line) for v in value]
            return tuple(items) if base.startswith("tuple[") else items
        if base == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"expected true/false, got {value!r}", line, key)
            return value
        if base == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"expected an integer, got {value!r}", line, key)
            return value
        if base == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"expected a number, got {value!r}", line, key)
            return float(value)
        if base == "str":
            return str(value)
    except ConfigError:
        raise
    raise ConfigError(f"unsupported field type {annotation}", line, key)


def parse_config(text: str, validate: bool = True) -> ExperimentConfig:
    """Parse config text into an :class:`ExperimentConfig` (defaults fill gaps)."""
    values: dict[str, dict] = {s: {} for s in SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        section, key, rhs = m.groups()
        full = f"{section}.{key}"
        if section not in SECTIONS:
            raise ConfigError(f"unknown section '{section}' (expected one of {sorted(SECTIONS)})", lineno, full)
        fields = {f.name: f for f in dataclasses.fields(SECTIONS[section]) if f.init}
        if key not in fields:
            raise ConfigError(f"unknown key (known: {', '.join(sorted(fields))})", lineno, full)
        if key in values[section]:
            raise ConfigError("key given twice", lineno, full)
        try:
            parsed = parse_value(rhs)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, full) from None
        values[section][key] = _coerce(parsed, str(fields[key].type), full, lineno)
    cfg = ExperimentConfig(**{s: cls(**values[s]) for s, cls in SECTIONS.items()})
    if validate:
        try:
            cfg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def load_config(path, validate: bool = True) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), validate)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    return str(v)


def format_config(cfg: ExperimentConfig) -> str:
    """Every key of every section, one assignment per line."""
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            if f.init:
                lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)
