"""Stable JSON reports.

Keys are sorted, floats are written with 17 significant digits and
non-finite floats become ``null``, so identical inputs give identical bytes.
"""

from __future__ import annotations

import enum
import hashlib
import math

import numpy as np

from .estimator import FitResult
from .inference import BootstrapReport
from .tuning import TuningCurve


def format_float(v) -> str:
    v = float(v)
    if not math.isfinite(v):
        return "null"
    if v == 0.0:
        v = 0.0  # drop the sign of -0.0
    return "%.17g" % v


def _plain(obj):
    """Map numpy scalars/arrays, tuples and enums onto JSON-ready builtins."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_plain(v) for v in items]
    return obj


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(_escape(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + _escape(k) + ": ")
            _emit(obj[k], indent, level + 1, out)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(o is None or isinstance(o, (int, float, bool)) for o in obj):
            # flat numeric lists stay on one line
            parts = []
            for o in obj:
                tmp = []
                _emit(o, indent, level + 1, tmp)
                parts.append("".join(tmp))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, o in enumerate(obj):
            out.append(pad)
            _emit(o, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2) -> str:
    """Key-sorted JSON text with a trailing newline."""
    out = []
    _emit(_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def fit_record(fit: FitResult, names=None) -> dict:
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(fit.beta.size)]
    rec = {
        "beta": fit.beta,
        "column_names": names,
        "intercept": fit.intercept,
        "l1_norm": fit.l1_norm,
        "objective": fit.objective,
        "active_constraints": list(fit.active_constraints),
        "zero_set": list(fit.zero_set),
        "zero_names": [names[j] for j in fit.zero_set],
        "df": fit.df,
        "solver_info": fit.solver_info,
    }
    return rec


def tuning_record(curve: TuningCurve) -> dict:
    return {
        "criterion": curve.criterion,
        "grid": curve.grid,
        "values": [None if not ok else float(v) for v, ok in zip(curve.pe, curve.valid)],
        "valid": [bool(v) for v in curve.valid],
        "selected_index": curve.selected_index,
        "selected_s": curve.selected_s,
        "diagnostics": curve.diagnostics,
    }


def bootstrap_record(rep: BootstrapReport) -> dict:
    return {
        "B": rep.B,
        "mode": rep.mode,
        "seed": rep.seed,
        "se": rep.se,
        "mean": rep.mean,
        "selection_freq": rep.selection_freq,
        "failures": rep.failures,
        "failure_messages": list(rep.failure_messages),
        "reliable": rep.reliable,
        "selected_s": list(rep.selected_s),
        "sigma_hat": rep.sigma_hat,
    }
