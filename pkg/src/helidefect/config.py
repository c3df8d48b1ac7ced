"""Key=value configuration files with typed defaults and flag overrides."""

from __future__ import annotations

import hashlib
import json
import warnings
from pathlib import Path

from .errors import ConfigError

DEFAULTS = {
    "recipe": "abc",
    "recipe.A": 1.0,
    "recipe.B": 1.0,
    "recipe.C": 1.0,
    "recipe.amplitude": 1.0,
    "recipe.theta": 0.5,
    "recipe.c0": False,
    "grid.n": 64,
    "grid.nz": 64,
    "seed": 0,
    "ladder.rungs": 6,
    "ladder.kernel": "bump",
    "ladder.tol": 0.02,
    "ladder.dealias": False,
    "series.dt": 0.0,
    "besov.theta": 2.0 / 3.0,
    "besov.p": 3.0,
    "mc.samples": 20000,
    "verify.pairs": 50,
    "verify.n": 16,
    "verify.tol": 1e-10,
    "budget.tol": 1e-8,
}


def _coerce(key, raw, line=None):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw).strip()
    except ValueError:
        raise ConfigError(f"cannot read {key}={raw!r} as {type(default).__name__}", line) from None


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown keys warn and are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value or "=" in value:
            raise ConfigError(f"malformed line {line.strip()!r}", lineno)
        if key not in DEFAULTS:
            warnings.warn(f"unknown config key {key!r} on line {lineno}", UserWarning, stacklevel=2)
            continue
        out[key] = _coerce(key, value, lineno)
    return out


def load_config(path=None, overrides=None) -> dict:
    """Defaults, then the file at ``path``, then non-None ``overrides``."""
    opts = dict(DEFAULTS)
    if path is not None:
        opts.update(parse_config(Path(path).read_text(encoding="utf-8")))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown option {key!r}")
        opts[key] = _coerce(key, str(value)) if not isinstance(value, type(DEFAULTS[key])) else value
    return opts


def config_hash(opts: dict) -> str:
    blob = json.dumps(opts, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
