"""Deterministic JSON output: insertion-ordered keys, floats at 17 significant digits."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
from gmpy2 import mpq, mpz


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    # shortest repr that round-trips exactly; always has a '.' or exponent
    return repr(float(x))


def _encode(obj, indent: int, level: int, out: list[str]) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer, mpz)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, (mpq, Fraction)):
        out.append(json.dumps(str(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, (key, val) in enumerate(obj.items()):
            out.append(("," if k else "") + pad + json.dumps(str(key)) + ": ")
            _encode(val, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(_float(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))
                                       for v in obj) + "]")
            return
        out.append("[")
        for k, val in enumerate(obj):
            out.append(("," if k else "") + pad)
            _encode(val, indent, level + 1, out)
        out.append(end + "]")
    elif hasattr(obj, "to_json"):
        _encode(obj.to_json(), indent, level, out)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps(obj, indent: int = 2) -> str:
    """Serialize with every float in its shortest round-trip form (bit-exact)."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def write(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path
