"""Plain-text ``key=value`` configuration files mapped onto dataclasses."""
from __future__ import annotations

import dataclasses


class InvalidConfig(ValueError):
    pass


def parse_key_values(lines):
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise InvalidConfig(f"line {line_no}: empty key")
        out[key] = value
    return out


def read_key_values(path):
    with open(path, encoding="utf-8") as fh:
        return parse_key_values(fh)


def _convert(raw, typ, key):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ.startswith("int"):
            return int(float(raw)) if any(c in raw for c in ".eE") else int(raw)
        if typ.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise InvalidConfig(f"{key}: cannot parse {raw!r} as {typ}") from None


def config_from_mapping(mapping, cls, prefix=""):
    """Build ``cls`` from string values under ``prefix``; other keys are ignored."""
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in mapping:
            kwargs[f.name] = _convert(mapping[key], f.type, key)
    return cls(**kwargs)


def config_to_lines(cfg, prefix=""):
    return [f"{prefix}{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
