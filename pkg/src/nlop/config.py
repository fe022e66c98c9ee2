"""Scenario configuration files.

Grammar (a subset of INI, parsed with ``configparser``)::

    # comment            ; comment
    [section]
    key = value          # inline comments allowed after '#' or ';'

Sections and keys are case-insensitive.  Lists are comma separated.  Every key
must be known to the scenario being run; typos are reported with their line
number rather than ignored.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Config", "ConfigError", "load_config", "parse_config"]

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^#;=:\s][^=:]*?)\s*[=:]")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number, plus (section, None) for headers."""
    out: dict = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip().lower()
            out.setdefault((section, None), no)
            continue
        m = _KEY.match(line)
        if m and section is not None and not line[:1].isspace():
            out.setdefault((section, m.group(1).strip().lower()), no)
    return out


@dataclass
class Config:
    sections: dict = field(default_factory=dict)  # section -> {key: raw string}
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def line(self, section: str, key: str | None = None) -> int | None:
        return self.lines.get((section, key))

    def error(self, message: str, section: str, key: str | None = None) -> ConfigError:
        return ConfigError(message, self.line(section, key) or self.line(section), self.source)

    def has(self, section: str, key: str) -> bool:
        return key in self.sections.get(section, {})

    def raw(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _convert(self, section, key, default, conv, what):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError, KeyError) as exc:
            raise self.error(f"[{section}] {key}: expected {what}, got {raw!r}", section, key) from exc

    def get_str(self, section: str, key: str, default: str | None = None) -> str | None:
        return self._convert(section, key, default, str, "a string")

    def get_float(self, section: str, key: str, default: float | None = None) -> float | None:
        return self._convert(section, key, default, float, "a number")

    def get_int(self, section: str, key: str, default: int | None = None) -> int | None:
        return self._convert(section, key, default, int, "an integer")

    def get_bool(self, section: str, key: str, default: bool | None = None) -> bool | None:
        states = configparser.ConfigParser.BOOLEAN_STATES
        return self._convert(section, key, default, lambda r: states[r.strip().lower()], "a boolean")

    def get_floats(self, section: str, key: str, default=None) -> list | None:
        return self._convert(section, key, default,
                             lambda r: [float(p) for p in r.split(",") if p.strip()], "a list of numbers")

    def get_strs(self, section: str, key: str, default=None) -> list | None:
        return self._convert(section, key, default,
                             lambda r: [p.strip() for p in r.split(",") if p.strip()], "a list")

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def check_known(self, schema: dict) -> None:
        """Reject sections or keys outside schema = {section: set(keys)}."""
        for sec, keys in self.sections.items():
            if sec not in schema:
                raise self.error(f"unknown section [{sec}]", sec)
            for key in keys:
                if key not in schema[sec]:
                    raise self.error(f"unknown key {key!r} in [{sec}]", sec, key)

    def to_dict(self) -> dict:
        return {sec: dict(sorted(keys.items())) for sec, keys in sorted(self.sections.items())}


def parse_config(text: str, source: str = "<config>") -> Config:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None,
                                   strict=True, empty_lines_in_values=False)
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, source) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line, source) from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, source) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, source) from exc
    sections = {sec.lower(): {k.lower(): v.strip() for k, v in cp.items(sec)} for sec in cp.sections()}
    return Config(sections, _line_index(text), source)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from exc
    return parse_config(text, str(path))
