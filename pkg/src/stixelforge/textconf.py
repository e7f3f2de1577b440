"""Tiny flat key=value text format used by run configs and scene specs.

Grammar, one entry per line:

    key = token [token ...]     # trailing comments start with '#'

Keys may repeat; every occurrence contributes one token list, so repeated keys
form nested lists (e.g. several `box = ...` lines). Blank lines and pure
comment lines are skipped.
"""
from __future__ import annotations

from .errors import ParseError


def parse_kv(text: str) -> dict[str, list[list[str]]]:
    """Parse the format into {key: [tokens-per-occurrence, ...]}."""
    out: dict[str, list[list[str]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError("empty key", line=lineno)
        out.setdefault(key, []).append(value.split())
    return out


_REQUIRED = object()


def get_scalar(kv: dict, key: str, cast, default=_REQUIRED):
    """Single-token value of `key`, cast; `default` when the key is absent.

    The last occurrence wins for repeated scalar keys.
    """
    if key not in kv:
        if default is _REQUIRED:
            raise ParseError(f"missing required key {key!r}")
        return default
    tokens = kv[key][-1]
    if len(tokens) != 1:
        raise ParseError(f"key {key!r} expects exactly one value, got {tokens!r}")
    try:
        return cast(tokens[0])
    except ValueError as exc:
        raise ParseError(f"key {key!r}: {exc}") from exc


def get_tuple(kv: dict, key: str, cast, arity: int, default=_REQUIRED):
    """Fixed-arity tuple value of `key`; the last occurrence wins."""
    if key not in kv:
        if default is _REQUIRED:
            raise ParseError(f"missing required key {key!r}")
        return default
    tokens = kv[key][-1]
    if len(tokens) != arity:
        raise ParseError(f"key {key!r} expects {arity} values, got {len(tokens)}")
    try:
        return tuple(cast(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"key {key!r}: {exc}") from exc
