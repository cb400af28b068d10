"""Deterministic serialization of reports: JSON with 17 significant digits and plain CSV tables."""

import csv
import io
import json
import math
from enum import Enum

import numpy as np


def _float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = "%.17g" % x
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _emit(obj, out, indent, level):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ","
    colon = ": " if indent else ":"
    if isinstance(obj, Enum):
        obj = obj.value
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if i:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + colon)
            _emit(obj[k], out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(sep)
            out.append(pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=None):
    """JSON text with sorted keys and every float printed with 17 significant digits."""
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out)


def report_json(report):
    return dumps(report.to_dict() if hasattr(report, "to_dict") else report, indent=2) + "\n"


def report_csv(report):
    """Case table as CSV: index, inputs (compact JSON), lhs, rhs, ratio, fine_ratio."""
    d = report.to_dict() if hasattr(report, "to_dict") else report
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theorem_id", "case", "inputs", "lhs", "rhs", "ratio", "fine_ratio"])
    for i, c in enumerate(d["cases"]):
        fr = c.get("fine_ratio")
        w.writerow([d["theorem_id"], i, dumps(c["inputs"]), _float(float(c["lhs"])), _float(float(c["rhs"])),
                    _float(float(c["ratio"])), "" if fr is None else _float(float(fr))])
    return buf.getvalue()
