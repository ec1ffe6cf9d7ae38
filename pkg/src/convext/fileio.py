"""Instance files (JSON), result documents and surface grids.

An instance file looks like::

    {
      "features": [[1.0], [-1.0]],
      "C": 1.0,
      "loss": {"kind": "hinge", "c0": 1.0, "c1": 1.0},
      "regularizer": {"kind": "l2", "half": true, "lower": null, "upper": null},
      "constraints": {"fixed": {"0": 1}, "cardinality": 1,
                      "linear": [{"coeffs": [1.0, 1.0], "rhs": 1.0}]},
      "decomposition": "full_term"
    }

Only ``features``, ``C``, ``loss`` and ``regularizer`` are required.
"""
from __future__ import annotations

import json
import math
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .instance import Decomposition, Instance, LabelConstraintSet
from .losses import LossSpec, RegularizerSpec

__all__ = [
    "InstanceParseError",
    "parse_instance",
    "load_instance",
    "instance_to_dict",
    "dump_instance",
    "parse_range",
    "format_number",
    "result_document",
    "write_surface",
]


class InstanceParseError(ConfigurationError):
    """Malformed instance file; carries the 1-based line and column when known."""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<string>"):
        self.line, self.column, self.source = line, column, source
        where = f"{source}:{line}:{column}: " if line else f"{source}: "
        super().__init__(where + message)


def _locate(text: str, key: str):
    """Line and column of the first occurrence of ``"key"`` in ``text`` (1-based), else (0, 0)."""
    idx = text.find(f'"{key}"')
    if idx < 0:
        return 0, 0
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def _need(doc: Mapping, key: str, text: str, source: str):
    if key not in doc:
        raise InstanceParseError(f"missing required key {key!r}", source=source)
    return doc[key]


def parse_instance(text: str, source: str = "<string>") -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(e.msg, e.lineno, e.colno, source) from None
    if not isinstance(doc, dict):
        raise InstanceParseError("top level must be an object", 1, 1, source)
    key = "features"
    try:
        X = np.array(_need(doc, "features", text, source), dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        key = "C"
        C = float(_need(doc, "C", text, source))
        key = "loss"
        ld = _need(doc, "loss", text, source)
        loss = LossSpec(ld["kind"], float(ld.get("c0", 1.0)), float(ld.get("c1", 1.0)))
        key = "regularizer"
        rd = _need(doc, "regularizer", text, source)
        reg = RegularizerSpec(
            rd["kind"], bool(rd.get("half", True)), _bounds(rd.get("lower"), -math.inf), _bounds(rd.get("upper"), math.inf)
        )
        key = "constraints"
        cd = doc.get("constraints") or {}
        fixed = {int(k): int(v) for k, v in (cd.get("fixed") or {}).items()}
        card = cd.get("cardinality")
        linear = tuple((tuple(r["coeffs"]), float(r["rhs"])) for r in (cd.get("linear") or []))
        labels = LabelConstraintSet(X.shape[0], fixed, None if card is None else int(card), linear)
        key = "decomposition"
        dec = Decomposition(doc.get("decomposition", "full_term"))
        key = "features"
        return Instance(X, C, loss, reg, labels, dec)
    except InstanceParseError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        line, col = _locate(text, key)
        msg = f"missing key {e}" if isinstance(e, KeyError) else str(e)
        raise InstanceParseError(f"invalid {key!r}: {msg}", line, col, source) from None


def _bounds(v, fill: float):
    """Bound list from JSON; ``null`` entries mean unbounded on that side."""
    if v is None:
        return None
    return tuple(fill if t is None else float(t) for t in np.atleast_1d(np.array(v, dtype=object)))


def _bounds_out(v):
    if v is None:
        return None
    return [float(t) if math.isfinite(t) else None for t in v]


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read(), source=str(path))


def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    reg = inst.reg
    lab = inst.labels
    return {
        "features": inst.features.tolist(),
        "C": float(inst.C),
        "loss": {"kind": inst.loss.kind.value, "c0": inst.loss.c0, "c1": inst.loss.c1},
        "regularizer": {
            "kind": reg.kind.value,
            "half": reg.half,
            "lower": _bounds_out(reg.lower),
            "upper": _bounds_out(reg.upper),
        },
        "constraints": {
            "fixed": {str(k): v for k, v in lab.fixed.items()},
            "cardinality": lab.cardinality,
            "linear": [{"coeffs": list(a), "rhs": b} for a, b in lab.linear],
        },
        "decomposition": inst.decomposition.value,
    }


def dump_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def parse_range(spec: str) -> np.ndarray:
    """Inclusive ``lo:hi:step`` (last point clamped to ``hi``), or a single number."""
    parts = spec.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigurationError(f"range {spec!r} is not 'lo:hi:step' or a number") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3:
        raise ConfigurationError(f"range {spec!r} is not 'lo:hi:step'")
    lo, hi, step = vals
    if not step > 0 or hi < lo:
        raise ConfigurationError(f"range {spec!r} needs lo <= hi and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9))
    # 15 significant digits drop the float fuzz of lo + k * step (e.g. -1.2999999999999998)
    pts = np.array([float("%.15g" % (lo + step * k)) for k in range(n + 1)])
    if hi - pts[-1] > 1e-9 * max(1.0, abs(hi)):
        pts = np.append(pts, hi)
    else:
        pts[-1] = hi
    return pts


def format_number(v: float) -> str:
    return "%.17g" % v


def _fmt_vec(v: Iterable[float]) -> str:
    return "[" + ", ".join(format_number(float(t)) for t in v) + "]"


def result_document(fields: Mapping[str, Any]) -> str:
    """``key: value`` lines; floats at 17 significant digits, vectors in brackets."""
    lines = []
    for k, v in fields.items():
        if isinstance(v, (np.ndarray, list, tuple)):
            s = _fmt_vec(v)
        elif isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, float):
            s = format_number(v)
        else:
            s = str(v)
        lines.append(f"{k}: {s}")
    return "\n".join(lines) + "\n"


def write_surface(path: str, rows: Sequence[Sequence[float]], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_number(float(v)) for v in row) + "\n")
