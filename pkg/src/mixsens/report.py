"""Canonical report serialization and CSV plot-data writers.

The JSON report is the primary artifact: one versioned document whose
numeric leaves are tagged with how they were computed ("quadrature", "MC",
or "reweighted") and with a tolerance.  Serialization is canonical — keys
sorted, floats printed with 17 significant digits (enough to round-trip a
double bit-exactly), fixed indentation — so identical analyses produce
byte-identical files and golden tests can diff them.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

SCHEMA_VERSION = "1"

QUADRATURE_TOL = 1e-9      # declared accuracy of 64-node tensor quadrature
QMC_TOL = 1e-4             # declared accuracy of the scrambled-Sobol fallback


def qty(value, mode, tol):
    """A tagged numeric report field."""
    if mode not in ("quadrature", "MC", "reweighted"):
        raise ValueError(f"unknown computation mode {mode!r}")
    return {"value": float(value), "mode": mode, "tol": float(tol)}


def quad_qty(value, engine_mode="quadrature"):
    """Tag a value from the integration engine, honouring a QMC fallback."""
    if engine_mode == "qmc":
        return qty(value, "MC", QMC_TOL)
    return qty(value, "quadrature", QUADRATURE_TOL)


def mc_qty(value, se=None, reweighted=False, default_tol=0.05):
    """Tag an MC estimate; tolerance is 2 standard errors when known."""
    mode = "reweighted" if reweighted else "MC"
    tol = default_tol if se is None else 2.0 * float(se)
    return qty(value, mode, tol)


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------

def _fmt_float(v):
    if math.isnan(v) or math.isinf(v):
        raise ValueError(f"non-finite value {v!r} cannot enter a report")
    text = f"{v:.17g}"
    # guarantee the text parses back to exactly the same double
    assert float(text) == v
    return text


def _serialize(obj, indent):
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        parts = [_serialize(v, indent + 1) for v in items]
        return "[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
            parts.append(f"{inner}{json.dumps(key)}: "
                         f"{_serialize(obj[key], indent + 1)}")
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def canonical_json(obj):
    return _serialize(obj, 0) + "\n"


def write_report(report, path):
    text = canonical_json(report)
    with open(path, "w", encoding="utf8", newline="\n") as fh:
        fh.write(text)
    return path


def read_report(path):
    with open(path, "r", encoding="utf8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# CSV plot data
# ---------------------------------------------------------------------------

def _cell(v):
    return f"{float(v):.17g}"


def write_effect_curve_csv(curve, path):
    """One first-order (or pair) effect curve: x[,y],value columns."""
    with open(path, "w", newline="", encoding="utf8") as fh:
        wr = csv.writer(fh)
        if len(curve.grids) == 1:
            wr.writerow(["x", "value"])
            for x, v in zip(curve.grids[0], curve.values):
                wr.writerow([_cell(x), _cell(v)])
        else:
            wr.writerow([f"x{i}" for i in curve.subset] + ["value"])
            g0, g1 = curve.grids
            for r, x in enumerate(g0):
                for c, y in enumerate(g1):
                    wr.writerow([_cell(x), _cell(y), _cell(curve.values[r, c])])
    return path


def write_mixture_curve_csv(mcurve, path):
    """Mixture first-order curve: grid, one column per component, mixture."""
    names = list(mcurve.component_values)
    with open(path, "w", newline="", encoding="utf8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x"] + names + ["mixture"])
        for k, x in enumerate(mcurve.grid):
            row = [_cell(x)]
            row += [_cell(mcurve.component_values[nm][k]) for nm in names]
            row.append(_cell(mcurve.mixture_values[k]))
            wr.writerow(row)
    return path


def write_indices_csv(rows, path):
    """Long-format index table: measure,input,index,value,se,mode."""
    with open(path, "w", newline="", encoding="utf8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["measure", "input", "index", "value", "se", "mode"])
        for measure, inp, kind, value, se, mode in rows:
            wr.writerow([measure, inp, kind, _cell(value),
                         "" if se is None else _cell(se), mode])
    return path
