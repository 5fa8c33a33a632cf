"""Flat ``key = value`` run configuration.

Precedence is command-line flag > config file > built-in default. The
file is found via ``--config`` or the ``LFCOV_CONFIG`` environment
variable. Keys use the long flag names with ``-`` or ``_``:

    # lfcov.conf
    policy-unit = grapheme_cluster
    skip = whitespace,punctuation
    percentile = 0.4
    chars-per-second = 12
"""

from __future__ import annotations

import os
from pathlib import Path

from lfcov.errors import LfcovError

ENV_VAR = "LFCOV_CONFIG"

BOOL_KEYS = {"cross_token", "collapse_whitespace", "lowercase", "strict_hours", "dedup"}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise LfcovError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key in BOOL_KEYS:
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise LfcovError(f"{source}:{lineno}: {key} must be true or false")
            values[key] = low in _TRUE
        else:
            values[key] = value
    return values


def load_config(path: str | os.PathLike | None) -> dict:
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LfcovError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))
