"""Small helpers for strict JSON decoding with field-path diagnostics."""

from __future__ import annotations

_MISSING = object()


def expect(payload: dict, key: str, kinds, path: str, error_cls=ValueError, default=_MISSING):
    """Fetch payload[key], checking its type; errors name the full field path."""
    if key not in payload:
        if default is not _MISSING:
            return default
        raise error_cls(f"{path}.{key}: missing required field")
    value = payload[key]
    if kinds is float:
        kinds = (int, float)
    if not isinstance(value, kinds) or isinstance(value, bool) and kinds is not bool:
        name = getattr(kinds, "__name__", None) or "/".join(k.__name__ for k in kinds)
        raise error_cls(f"{path}.{key}: expected {name}, got {type(value).__name__}")
    return value
