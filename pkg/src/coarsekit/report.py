"""Verification reports and their deterministic serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


@dataclass
class Report:
    command: str = ""
    inputs: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    measurements: dict = field(default_factory=dict)
    output: object = None

    def check(self, name: str, passed, witness=None) -> bool:
        passed = bool(passed)
        entry = {"check": name, "pass": passed}
        if not passed:
            entry["witness"] = witness if witness is not None else "unavailable"
        self.verdicts.append(entry)
        return passed

    def measure(self, name: str, value) -> None:
        self.measurements[name] = value

    @property
    def ok(self) -> bool:
        return all(v["pass"] for v in self.verdicts)

    def to_document(self) -> dict:
        doc = {
            "command": self.command,
            "inputs": self.inputs,
            "verdicts": self.verdicts,
            "measurements": self.measurements,
            "output": self.output,
        }
        return {k: v for k, v in doc.items() if v not in ("", None, {}, [])}


def format_float(x: float) -> str:
    """Fixed 12 significant digits; scientific notation outside [1e-4, 1e12)."""
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0:
        x = 0.0  # drop the sign of -0.0
    # decide on the exponent after rounding, so 0.99999999999999 keeps 12 digits
    exp = int(f"{x:.{SIG_DIGITS - 1}e}".split("e")[1])
    if x != 0 and (abs(x) < 1e-4 or exp >= 12):
        return np.format_float_scientific(x, precision=SIG_DIGITS - 1, unique=False)
    return f"{x:.{max(SIG_DIGITS - 1 - exp, 0)}f}"


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (tuple, list, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in items]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed float formatting, no trailing spaces."""
    obj = _plain(obj)

    def enc(o, depth):
        pad = "  " * (depth + 1)
        end = "  " * depth
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return format_float(o)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (list, dict)) for v in o):
                return "[" + ", ".join(enc(v, depth) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, depth + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = sorted(o.items())
            return "{\n" + ",\n".join(f"{pad}{json.dumps(k)}: {enc(v, depth + 1)}" for k, v in items) + "\n" + end + "}"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def emit_report(report: Report, path=None, stream=None) -> str:
    text = dumps(report.to_document())
    if path is not None:
        Path(path).write_text(text)
    elif stream is not None:
        stream.write(text)
    return text
