"""Summary CSV, per-run JSON and plot-data files.

Layout of an output directory::

    summary.csv                 one row per run
    runs/<run>.json             full report, trace and solution point
    plots/<run>_gantt.csv       unit,period,on
    plots/<run>_generation.csv  unit,period,p_mw,q_mvar
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .case_model import PowerCase
from .drivers import RunReport
from .formulation import DecisionPoint

SUMMARY_COLUMNS = ("rescale", "round", "penalty", "iter1", "acfeas1", "iter2", "acfeas2",
                   "feasible", "cost", "time_s")


def _sci(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.2e}"


def format_row(rep: RunReport) -> dict[str, str]:
    return {
        "rescale": rep.rescale,
        "round": rep.round,
        "penalty": _sci(rep.penalty),
        "iter1": str(int(rep.iter1)),
        "acfeas1": _sci(rep.acfeas1),
        "iter2": str(int(rep.iter2)),
        "acfeas2": _sci(rep.acfeas2),
        "feasible": "true" if rep.feasible else "false",
        "cost": "" if not math.isfinite(rep.cost) else str(int(round(rep.cost))),
        "time_s": f"{rep.time_s:.2f}",
    }


def parse_row(row: dict[str, str]) -> dict:
    """Inverse of :func:`format_row` (up to the printed precision)."""
    num = lambda s: math.nan if s == "" else float(s)
    return {
        "rescale": row["rescale"], "round": row["round"], "penalty": num(row["penalty"]),
        "iter1": int(row["iter1"]), "acfeas1": num(row["acfeas1"]),
        "iter2": int(row["iter2"]), "acfeas2": num(row["acfeas2"]),
        "feasible": row["feasible"] == "true",
        "cost": num(row["cost"]), "time_s": float(row["time_s"]),
    }


def write_summary(reports, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for rep in reports:
            wr.writerow(format_row(rep))


def read_summary(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [parse_row(r) for r in csv.DictReader(fh)]


def run_name(rep: RunReport, index: int) -> str:
    raw = f"{index:03d}_{rep.pipeline}_{rep.rescale}_{rep.round}_{rep.penalty:.0e}"
    if rep.seed is not None:
        raw += f"_s{rep.seed}"
    return re.sub(r"[^A-Za-z0-9_.+-]", "-", raw)


def gantt_rows(point: DecisionPoint, case: PowerCase) -> list[tuple[str, int, int]]:
    u = np.round(point.u).astype(int)
    return [(unit.name or f"g{g + 1}", t + 1, int(u[g, t]))
            for g, unit in enumerate(case.thermal_units) for t in range(case.horizon)]


def generation_rows(point: DecisionPoint, case: PowerCase) -> list[tuple[str, int, float, float]]:
    base = case.base_mva
    return [(unit.name or f"g{g + 1}", t + 1, float(point.p[g, t] * base), float(point.q[g, t] * base))
            for g, unit in enumerate(case.thermal_units) for t in range(case.horizon)]


def on_periods(point_u, g: int) -> list[int]:
    """1-based periods in which unit ``g`` is committed."""
    u = np.round(np.asarray(point_u)).astype(int)
    return [t + 1 for t in range(u.shape[1]) if u[g, t] == 1]


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def emit_reports(results, out_dir, case: PowerCase) -> list[Path]:
    """Write summary, run files and plot data for ``[(point, report), ...]``."""
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    written = [out / "summary.csv"]
    write_summary([rep for _, rep in results], written[0])
    for k, (point, rep) in enumerate(results):
        name = run_name(rep, k)
        doc = {"report": rep.to_dict(), "point": point.to_dict() if point is not None else None}
        path = out / "runs" / f"{name}.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=1, default=_json_default, allow_nan=True)
            fh.write("\n")
        written.append(path)
        if point is None:
            continue
        for suffix, header, rows, fmt in (
            ("gantt", ("unit", "period", "on"), gantt_rows(point, case), ("{}", "{}", "{}")),
            ("generation", ("unit", "period", "p_mw", "q_mvar"), generation_rows(point, case),
             ("{}", "{}", "{:.6f}", "{:.6f}")),
        ):
            path = out / "plots" / f"{name}_{suffix}.csv"
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(f.format(v) for f, v in zip(fmt, row)) + "\n")
            written.append(path)
    return written
