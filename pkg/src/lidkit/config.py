"""Flat key-value config files.

Every tool in the kit reads the same trivial format: one ``key = value``
pair per line, ``#`` starts a comment, later keys override earlier ones.
Values are kept as strings; typed getters convert on access so a single
dict can feed the feature, network, and harness configs.
"""

from __future__ import annotations

import hashlib

from .errors import InvalidConfig


def parse_config(text: str) -> dict[str, str]:
    """Parse config text into an ordered key -> value dict."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise InvalidConfig(f"line {line_no}: empty key")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def get_str(cfg: dict[str, str], key: str, default: str) -> str:
    return cfg.get(key, default)


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    raw = cfg.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise InvalidConfig(f"{key}: expected a number, got {raw!r}") from None


def get_int(cfg: dict[str, str], key: str, default: int) -> int:
    raw = cfg.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise InvalidConfig(f"{key}: expected an integer, got {raw!r}") from None


def get_floats(cfg: dict[str, str], key: str, default: tuple[float, ...]) -> tuple[float, ...]:
    raw = cfg.get(key)
    if raw is None:
        return default
    try:
        return tuple(float(tok) for tok in raw.split())
    except ValueError:
        raise InvalidConfig(f"{key}: expected numbers, got {raw!r}") from None


def config_hash(cfg: dict[str, str], seed: int | None = None) -> str:
    """Short stable digest of a config (plus seed), used in output stamps."""
    h = hashlib.sha256()
    for key in sorted(cfg):
        h.update(f"{key}={cfg[key]}\n".encode("utf-8"))
    if seed is not None:
        h.update(f"seed={seed}\n".encode("utf-8"))
    return h.hexdigest()[:12]
