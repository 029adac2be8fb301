"""Report serialization: round-trip CSV, canonical JSON and columnar plot data."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """CSV with shortest round-trip decimal formatting for doubles."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def jsonable(obj: Any) -> Any:
    """Plain Python structure with numpy scalars and arrays converted."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def write_json(path, obj: Any) -> Path:
    """Sorted-key JSON; floats use repr so values round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), sort_keys=True, indent=1) + "\n")
    return path


def _columns(rows: Sequence[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def _is_table(v: Any) -> bool:
    return isinstance(v, list) and all(isinstance(r, dict) for r in v)


def _scalar(v: Any) -> bool:
    return isinstance(v, (int, float, str, bool, np.integer, np.floating, np.bool_)) or v is None


def tables(report: dict, prefix: str = "") -> dict[str, tuple[list[str], list[dict]]]:
    """All lists of row dicts in a (nested) report, keyed by their dotted path.

    Nested values inside rows are dropped; only scalar columns are kept.
    A report may declare ``{"columns": [...], "rows": [...]}`` explicitly,
    which also fixes the header of an empty table.
    """
    out: dict[str, tuple[list[str], list[dict]]] = {}
    if "rows" in report and "columns" in report and _is_table(report["rows"]):
        out[prefix or "rows"] = (list(report["columns"]), report["rows"])
        return out
    for k, v in report.items():
        name = f"{prefix}.{k}" if prefix else str(k)
        if v and _is_table(v):
            rows = [{c: x for c, x in r.items() if _scalar(x)} for r in v]
            out[name] = (_columns(rows), rows)
            for i, r in enumerate(v):
                out.update(tables(r, f"{name}[{i}]"))
        elif isinstance(v, dict):
            out.update(tables(v, name))
    return out


def dini_partial_sums(per_scale: Sequence, power: int = 2) -> list[dict]:
    """Rows (r, f, partial) with the running log-trapezoid sum of |f|^power."""
    rows, acc = [], 0.0
    prev = None
    for r, f in per_scale:
        v = abs(f) ** power
        if prev is not None:
            acc += 0.5 * (v + prev[1]) * math.log(r / prev[0])
        rows.append({"r": float(r), "f": float(f), "partial": acc})
        prev = (r, v)
    return rows


def corona_tables(res) -> dict[str, tuple[list[str], list[dict]]]:
    """Point/label/graph-height columns and the graph polyline of a corona run."""
    fr = res.frame
    p = fr.proj(res.points)
    height = res.height(p)
    perp = fr.perp(res.points)
    d = res.points.shape[1]
    pcols = [f"x{i + 1}" for i in range(d)]
    qcols = [f"p{i + 1}" for i in range(p.shape[1])]
    rows = []
    for k in range(len(res.points)):
        row = {c: float(res.points[k, i]) for i, c in enumerate(pcols)}
        row.update({c: float(p[k, i]) for i, c in enumerate(qcols)})
        row.update(label=str(res.labels[k]), weight=float(res.weights[k]), h=float(res.h[k]),
                   perp=float(perp[k]), graph_height=float(height[k]))
        rows.append(row)
    nodes = res.graph.nodes
    grows = [dict({c: float(nodes[k, i]) for i, c in enumerate(qcols)}, value=float(res.graph.values[k]))
             for k in range(len(nodes))]
    cubes = res.whitney
    crows = [dict({f"lo{i + 1}": float(cubes.lo[k, i]) for i in range(cubes.lo.shape[1])},
                  side=float(cubes.side[k]), kind=str(cubes.kind[k])) for k in range(len(cubes))]
    return {"points": (pcols + qcols + ["label", "weight", "h", "perp", "graph_height"], rows),
            "graph": (qcols + ["value"], grows),
            "whitney": ([f"lo{i + 1}" for i in range(cubes.lo.shape[1])] + ["side", "kind"], crows)}


def emit_plotdata(report, out_dir, stem: str = "report") -> list[Path]:
    """Write every table of ``report`` as ``<stem>.<table>.csv``.

    ``report`` is a dict (coefficient tables, Dini per-scale lists, verify
    reports) or a corona result.  A report without any table yields a
    header-only ``<stem>.csv``.
    """
    out_dir = Path(out_dir)
    if hasattr(report, "whitney") and hasattr(report, "labels"):
        found = corona_tables(report)
    else:
        found = tables(report)
        if "per_scale" in report and report.get("power") is not None:
            found["partial_sums"] = (["r", "f", "partial"], dini_partial_sums(report["per_scale"], report["power"]))
    if not found:
        row = {k: v for k, v in report.items() if _scalar(v)}
        cols = list(report.get("columns", [])) or list(row)
        return [write_csv(out_dir / f"{stem}.csv", cols, [row] if row else [])]
    return [write_csv(out_dir / f"{stem}.{name}.csv", cols, rows) for name, (cols, rows) in sorted(found.items())]
