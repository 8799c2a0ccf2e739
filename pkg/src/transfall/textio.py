"""Line-oriented text encoding shared by the model export formats.

Floats are written with 17 significant digits, which is enough for
``float(text)`` to reproduce the original double exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_row(values) -> str:
    return " ".join(fmt(v) for v in np.ravel(values))


def parse_row(line: str) -> np.ndarray:
    return np.array([float(tok) for tok in line.split()], dtype=float)


def format_header(kind: str, **fields) -> str:
    parts = [kind]
    for key, value in fields.items():
        parts.append(f"{key}={fmt(value) if isinstance(value, float) else value}")
    return " ".join(parts)


def parse_header(line: str, kind: str) -> dict[str, str]:
    tokens = line.split()
    if not tokens or tokens[0] != kind:
        raise DataError(f"expected a {kind!r} header, got {line[:60]!r}")
    out = {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise DataError(f"bad header field {tok!r}")
        out[key] = value
    return out
