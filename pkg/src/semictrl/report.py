"""Writing RunRecords to disk.

Machine formats (JSON, CSV) carry 17 significant digits; the human
summary carries 6. Non-finite floats are written as the strings "nan",
"inf" and "-inf" so the JSON stays strict.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List

from .runner import RunRecord

MACHINE_FMT = ".17g"
HUMAN_FMT = ".6g"


def fmt_float(x, spec=MACHINE_FMT) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, spec)


def to_json(obj, indent=2, _level=0) -> str:
    """JSON text with floats at 17 significant digits and keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = fmt_float(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        return to_json(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif hasattr(obj, "item") and not isinstance(obj, (list, tuple)):
        _flatten(prefix, obj.item(), out)
    elif isinstance(obj, (bool, int, float)) or obj is None or isinstance(obj, str):
        out[prefix] = obj


def _cell(v, spec):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt_float(v, spec)
    return "" if v is None else str(v)


# -- tables derived from a record ------------------------------------------------------


def residual_rows(rec: RunRecord):
    """(header, rows) of convergence histories, or None if the record has none."""
    out = rec.outputs
    if "cells" in out:
        rows = [
            (c["direction"], c["radius"], i, r)
            for c in out["cells"]
            for i, r in enumerate(c["residual_history"])
        ]
        return ("direction", "radius", "iteration", "residual"), rows
    if "residual_history" in out:
        return ("iteration", "residual"), list(enumerate(out["residual_history"]))
    return None


def spectrum_rows(rec: RunRecord):
    g = rec.outputs.get("gramian", rec.outputs if "eigenvalues" in rec.outputs else None)
    if g is None:
        return None
    return ("index", "eigenvalue"), list(enumerate(g["eigenvalues"]))


def constants_table(rec: RunRecord) -> Dict[str, object]:
    """Flat key/value view of verification constants (empty for other experiments)."""
    out = rec.outputs
    if rec.config.get("experiment") != "verify" or not out:
        return {}
    flat: Dict[str, object] = {}
    for key in (
        "b1_alpha",
        "b1_gamma",
        "b1_fit_r2",
        "b1_degenerate",
        "b2_lipschitz",
        "lemma4_c_empirical",
        "lemma4_c_theoretical",
        "frechet_slope",
        "theorem7_ratio_max",
    ):
        flat[key] = out[key]
    _flatten("constants", out["constants"], flat)
    _flatten("checks", out["checks"], flat)
    flat["passed"] = out["passed"]
    return flat


def _csv(header, rows, spec=MACHINE_FMT) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(v, spec) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def summary_lines(rec: RunRecord) -> List[str]:
    h = HUMAN_FMT
    lines = [
        f"scenario    {rec.scenario}",
        f"experiment  {rec.config.get('experiment')}",
        f"version     {rec.version}",
        f"timestamp   {rec.timestamp}",
        f"duration    {fmt_float(rec.duration, h)} s",
        f"status      {rec.status}",
    ]
    if rec.error:
        lines.append(f"error       [{rec.error['category']}] {rec.error['type']}: {rec.error['message']}")
    out = rec.outputs
    if "summary" in out:
        lines.append("")
        lines.append(f"{'radius':>10} {'success':>9} {'max resid':>12} {'max iter':>9} {'mean contr':>12}")
        for row in out["summary"]:
            lines.append(
                f"{fmt_float(row['radius'], h):>10} {row['n_success']:>4}/{row['n_total']:<4}"
                f" {fmt_float(row['max_residual'], h):>12} {row['max_iterations']:>9}"
                f" {fmt_float(row['mean_contraction'], h):>12}"
            )
    elif "residual_history" in out:
        lines.append("")
        lines.append(f"success     {out['success']}")
        lines.append(f"iterations  {out['iterations']}")
        lines.append(f"residual    {fmt_float(out['residual'], h)}")
        lines.append(f"contraction {fmt_float(out['contraction_estimate'], h)}")
    elif "final_state" in out:
        lines.append("")
        lines.append("final state " + " ".join(fmt_float(v, h) for v in out["final_state"]))
    table = constants_table(rec)
    if table:
        lines.append("")
        width = max(len(k) for k in table)
        lines += [f"{k:<{width}}  {_cell(v, h)}" for k, v in table.items()]
    g = out.get("gramian", out if "eigenvalues" in out else None)
    if g is not None:
        lines.append("")
        lines.append(f"gramian eigenvalues  {' '.join(fmt_float(v, h) for v in g['eigenvalues'])}")
        lines.append(f"gramian condition    {fmt_float(g['condition_number'], h)}")
    return lines


# -- files ---------------------------------------------------------------------------------


def emit_report(rec: RunRecord, out_dir, fmt: str = "table") -> Dict[str, Path]:
    """Write all files for ``rec`` into ``out_dir``; return them keyed by kind.

    ``fmt`` only selects what :func:`render` prints; the files are the same
    for every format.
    """
    if fmt not in ("table", "csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}

    def write(kind, suffix, text):
        path = out_dir / f"{rec.scenario}.{suffix}"
        path.write_text(text)
        written[kind] = path

    write("result", "result.json", to_json(rec.machine_dict()) + "\n")
    res = residual_rows(rec)
    if res is not None:
        write("residuals", "residuals.csv", _csv(*res))
    spec = spectrum_rows(rec)
    if spec is not None:
        write("spectrum", "spectrum.csv", _csv(*spec))
    table = constants_table(rec)
    if table:
        write("constants", "constants.csv", _csv(("key", "value"), list(table.items())))
    write("report", "report.txt", "\n".join(summary_lines(rec)) + "\n")
    return written


def render(rec: RunRecord, fmt: str = "table") -> str:
    """Text for stdout in the requested format."""
    if fmt == "json":
        return to_json(rec.machine_dict())
    if fmt == "csv":
        table = constants_table(rec)
        if table:
            return _csv(("key", "value"), list(table.items())).rstrip("\n")
        res = residual_rows(rec)
        if res is not None:
            return _csv(*res).rstrip("\n")
        flat: Dict[str, object] = {}
        _flatten("", {"scenario": rec.scenario, "status": rec.status, "error": rec.error or {}}, flat)
        return _csv(("key", "value"), list(flat.items())).rstrip("\n")
    return "\n".join(summary_lines(rec))
