"""Helpers for the plain-text ``KEY: value`` files used across the toolkit.

All writers emit floats with 17 significant digits so that a written file,
parsed and written again, is byte-identical.
"""

from __future__ import annotations


class KvFormatError(ValueError):
    """A key-value document is structurally malformed."""


def fmt(x: float) -> str:
    """Format a float with enough digits to round-trip exactly."""
    return "%.17g" % float(x)


def read_kv(text: str) -> dict[str, str]:
    """Parse ``KEY: value`` lines into an ordered dict of raw value strings.

    Blank lines and lines starting with ``#`` are skipped. A non-blank line
    without a colon raises KvFormatError.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise KvFormatError(f"line {lineno}: expected 'KEY: value', got {line!r}")
        key, _, value = line.partition(":")
        out[key.strip()] = value.strip()
    return out


def get_float(kv: dict[str, str], key: str) -> float:
    """Fetch a required numeric value, tolerating a trailing unit token."""
    if key not in kv:
        raise KvFormatError(f"missing required key: {key}")
    token = kv[key].split()[0] if kv[key].split() else ""
    try:
        return float(token)
    except ValueError:
        raise KvFormatError(f"{key}: non-numeric value {kv[key]!r}") from None


def get_floats(kv: dict[str, str], key: str, count: int) -> list[float]:
    """Fetch a required whitespace-separated list of exactly *count* floats."""
    if key not in kv:
        raise KvFormatError(f"missing required key: {key}")
    tokens = kv[key].split()
    if len(tokens) != count:
        raise KvFormatError(f"{key}: expected {count} values, got {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise KvFormatError(f"{key}: non-numeric value {kv[key]!r}") from None
