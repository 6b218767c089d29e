"""Minimal sectioned key=value config files.

UTF-8 text, one ``key = value`` per line, ``#`` comments, ``[section]``
headers.  Parsing is fail-closed: consumers validate every key against a
schema and unknown keys are errors.
"""

from __future__ import annotations

import re
from pathlib import Path


class ConfigError(ValueError):
    pass


_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_-]+)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_config(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _SECTION_RE.match(line)
        if match:
            current_name = match.group(1)
            current = sections.setdefault(current_name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key {key!r} outside any [section]")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current_name}]")
        current[key] = value
    return sections


def load_config(path) -> dict[str, dict[str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def validate_keys(sections: dict[str, dict[str, str]],
                  schema: dict[str, object]) -> None:
    """Reject unknown sections and keys; schema values are key sets or
    callables accepting a key name (for patterned keys like layerN)."""
    for name, keys in sections.items():
        if name not in schema:
            raise ConfigError(f"unknown section [{name}]")
        allowed = schema[name]
        for key in keys:
            ok = allowed(key) if callable(allowed) else key in allowed
            if not ok:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")


def get_value(sections, section: str, key: str, default=None) -> str | None:
    return sections.get(section, {}).get(key, default)


def parse_bool(value: str, context: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{context}: expected a boolean, got {value!r}")


def parse_number(value: str, context: str, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{context}: expected a {kind.__name__}, got {value!r}") from None


def parse_float_list(value: str, context: str) -> list[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{context}: expected comma-separated numbers, got {value!r}") from None
