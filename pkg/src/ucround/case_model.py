"""Grid, unit and demand data model.

Case files are JSON documents (see ``docs/case_format.md``). Powers are given
in MW / MVAr, cost coefficients in $ per MW-based units, impedances and
voltages in per-unit. :func:`load_case` validates the document and returns a
:class:`PowerCase` normalized to per-unit on ``base_mva``; cost coefficients
are rescaled so that the cost of a per-unit dispatch is still in dollars.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np


class CaseError(ValueError):
    """Raised when a case document is malformed or violates an invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float
    v_max: float
    g_sh: float = 0.0
    b_sh: float = 0.0
    is_reference: bool = False
    theta0: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    i_max: float = math.inf


@dataclass(frozen=True)
class ThermalUnit:
    bus: int
    a2: float
    a1: float
    a0: float
    c_up: float
    c_down: float
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    r_up: float
    r_down: float
    s_up: float
    s_down: float
    t_up: int
    t_down: int
    u0: int
    p0: float
    dwell0: int
    name: str = ""


@dataclass(frozen=True)
class SyncCondenser:
    bus: int
    q_min: float
    q_max: float
    name: str = ""


@dataclass(frozen=True)
class DemandSeries:
    horizon: int
    # bus id -> series over the horizon
    p_demand: dict[int, tuple[float, ...]]
    q_demand: dict[int, tuple[float, ...]]


@dataclass(frozen=True)
class ReserveSeries:
    p_reserve_req: tuple[float, ...]


@dataclass(frozen=True)
class PowerCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    thermal_units: tuple[ThermalUnit, ...]
    condensers: tuple[SyncCondenser, ...]
    demand: DemandSeries
    reserve: ReserveSeries
    per_unit: bool = False
    name: str = ""

    @property
    def horizon(self) -> int:
        return self.demand.horizon

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_units(self) -> int:
        return len(self.thermal_units)

    @property
    def n_condensers(self) -> int:
        return len(self.condensers)

    def bus_index(self) -> dict[int, int]:
        """Map bus id -> position in ``buses``."""
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def ref_bus(self) -> int:
        """Position of the reference bus."""
        for k, b in enumerate(self.buses):
            if b.is_reference:
                return k
        raise CaseError("case has no reference bus")

    def demand_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Active and reactive demand as ``(n_bus, horizon)`` arrays."""
        idx = self.bus_index()
        pd = np.zeros((self.n_bus, self.horizon))
        qd = np.zeros((self.n_bus, self.horizon))
        for bus, series in self.demand.p_demand.items():
            pd[idx[bus]] += np.asarray(series, dtype=float)
        for bus, series in self.demand.q_demand.items():
            qd[idx[bus]] += np.asarray(series, dtype=float)
        return pd, qd

    def total_demand(self) -> np.ndarray:
        """System active demand per period."""
        return self.demand_matrices()[0].sum(axis=0)

    def unit_array(self, name: str) -> np.ndarray:
        return np.array([getattr(u, name) for u in self.thermal_units], dtype=float)


# ----------------------------------------------------------------------------
# validation

def validate(case: PowerCase) -> list[str]:
    """Return the list of invariant violations of ``case`` (empty if valid)."""
    out: list[str] = []
    ids = [b.id for b in case.buses]
    idset = set(ids)
    if len(idset) != len(ids):
        out.append("duplicate bus ids")
    if not case.base_mva > 0:
        out.append("base_mva must be positive")
    nref = sum(1 for b in case.buses if b.is_reference)
    if nref == 0:
        out.append("no reference bus")
    elif nref > 1:
        out.append("multiple reference buses")
    for b in case.buses:
        if not 0 < b.v_min <= b.v_max:
            out.append(f"bus {b.id}: requires 0 < v_min <= v_max")
    for k, br in enumerate(case.branches):
        tag = f"branch {k}"
        if br.from_bus not in idset or br.to_bus not in idset:
            out.append(f"{tag}: dangling bus reference")
        if br.from_bus == br.to_bus:
            out.append(f"{tag}: from_bus equals to_bus")
        if br.r == 0 and br.x == 0:
            out.append(f"{tag}: zero impedance")
        if not br.tap > 0:
            out.append(f"{tag}: tap must be positive")
        if not br.i_max > 0:
            out.append(f"{tag}: i_max must be positive")
    for k, u in enumerate(case.thermal_units):
        tag = f"unit {u.name or k}"
        if u.bus not in idset:
            out.append(f"{tag}: dangling bus reference")
        if not u.p_min > 0:
            out.append(f"{tag}: p_min must be positive")
        if u.p_min > u.p_max:
            out.append(f"{tag}: p_min must not exceed p_max")
        if u.q_min > u.q_max:
            out.append(f"{tag}: q_min must not exceed q_max")
        if u.a2 < 0:
            out.append(f"{tag}: a2 must be nonnegative")
        if u.t_up < 1 or u.t_down < 1:
            out.append(f"{tag}: minimum up/down times must be >= 1")
        if int(u.t_up) != u.t_up or int(u.t_down) != u.t_down:
            out.append(f"{tag}: minimum up/down times must be integers")
        if u.u0 not in (0, 1):
            out.append(f"{tag}: u0 must be 0 or 1")
        elif u.u0 == 0 and u.p0 != 0:
            out.append(f"{tag}: u0 = 0 requires p0 = 0")
        elif u.u0 == 1 and not u.p_min <= u.p0 <= u.p_max:
            out.append(f"{tag}: u0 = 1 requires p_min <= p0 <= p_max")
        if u.dwell0 < 0 or int(u.dwell0) != u.dwell0:
            out.append(f"{tag}: dwell0 must be a nonnegative integer")
        for attr in ("r_up", "r_down", "s_up", "s_down"):
            if getattr(u, attr) < 0:
                out.append(f"{tag}: {attr} must be nonnegative")
    for k, c in enumerate(case.condensers):
        if c.bus not in idset:
            out.append(f"condenser {c.name or k}: dangling bus reference")
        if c.q_min > c.q_max:
            out.append(f"condenser {c.name or k}: q_min must not exceed q_max")
    h = case.demand.horizon
    if h < 1:
        out.append("horizon must be >= 1")
    for kind, table in (("p", case.demand.p_demand), ("q", case.demand.q_demand)):
        for bus, series in table.items():
            if bus not in idset:
                out.append(f"demand {kind}: dangling bus reference {bus}")
            if len(series) != h:
                out.append(f"demand {kind} at bus {bus}: series length mismatch")
    if len(case.reserve.p_reserve_req) != h:
        out.append("reserve: series length mismatch")
    if any(r < 0 for r in case.reserve.p_reserve_req):
        out.append("reserve: requirement must be nonnegative")
    return out


# ----------------------------------------------------------------------------
# per-unit normalization

_UNIT_MW_FIELDS = ("p_min", "p_max", "q_min", "q_max", "r_up", "r_down",
                   "s_up", "s_down", "p0")


def to_per_unit(case: PowerCase) -> PowerCase:
    """Divide every MW/MVAr quantity by ``base_mva``; no-op if already done."""
    if case.per_unit:
        return case
    base = case.base_mva
    buses = tuple(replace(b, g_sh=b.g_sh / base, b_sh=b.b_sh / base) for b in case.buses)
    units = []
    for u in case.thermal_units:
        kw: dict[str, Any] = {f: getattr(u, f) / base for f in _UNIT_MW_FIELDS}
        # keep dollars: cost(P_pu) == cost(P_MW)
        kw["a2"] = u.a2 * base * base
        kw["a1"] = u.a1 * base
        units.append(replace(u, **kw))
    conds = tuple(replace(c, q_min=c.q_min / base, q_max=c.q_max / base)
                  for c in case.condensers)
    demand = DemandSeries(
        horizon=case.demand.horizon,
        p_demand={k: tuple(v / base for v in s) for k, s in case.demand.p_demand.items()},
        q_demand={k: tuple(v / base for v in s) for k, s in case.demand.q_demand.items()},
    )
    reserve = ReserveSeries(tuple(v / base for v in case.reserve.p_reserve_req))
    return replace(case, buses=buses, thermal_units=tuple(units), condensers=conds,
                   demand=demand, reserve=reserve, per_unit=True)


# ----------------------------------------------------------------------------
# JSON I/O

_BUS_REQ = {"id": int, "v_min": float, "v_max": float}
_BRANCH_REQ = {"from_bus": int, "to_bus": int, "r": float, "x": float}
_UNIT_REQ = {
    "bus": int, "a2": float, "a1": float, "a0": float, "c_up": float,
    "c_down": float, "p_min": float, "p_max": float, "q_min": float,
    "q_max": float, "r_up": float, "r_down": float, "s_up": float,
    "s_down": float, "t_up": int, "t_down": int, "u0": int, "p0": float,
    "dwell0": int,
}
_COND_REQ = {"bus": int, "q_min": float, "q_max": float}


def _check_type(value: Any, kind: type, where: str) -> Any:
    if isinstance(value, bool):
        raise CaseError(f"{where}: wrong type (bool)")
    if kind is int:
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise CaseError(f"{where}: wrong type, expected integer")
    if kind is float:
        if isinstance(value, (int, float)):
            return float(value)
        raise CaseError(f"{where}: wrong type, expected number")
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise CaseError(f"{where}: wrong type, expected boolean")
    return value


def _record(doc: Any, req: dict[str, type], opt: dict[str, type], where: str) -> dict:
    if not isinstance(doc, dict):
        raise CaseError(f"{where}: expected an object")
    out = {}
    for key, kind in req.items():
        if key not in doc:
            raise CaseError(f"{where}: missing field '{key}'")
        out[key] = _check_type(doc[key], kind, f"{where}.{key}")
    for key, kind in opt.items():
        if key in doc:
            if kind is bool:
                if not isinstance(doc[key], bool):
                    raise CaseError(f"{where}.{key}: wrong type, expected boolean")
                out[key] = doc[key]
            else:
                out[key] = _check_type(doc[key], kind, f"{where}.{key}")
    return out


def _series(doc: Any, where: str) -> tuple[float, ...]:
    if not isinstance(doc, list):
        raise CaseError(f"{where}: expected a list of numbers")
    return tuple(_check_type(v, float, f"{where}[{k}]") for k, v in enumerate(doc))


def case_from_dict(doc: dict) -> PowerCase:
    """Build a validated, per-unit :class:`PowerCase` from a parsed document."""
    if not isinstance(doc, dict):
        raise CaseError("case document must be a JSON object")
    for key in ("base_mva", "horizon", "buses", "branches", "thermal_units", "demand", "reserve"):
        if key not in doc:
            raise CaseError(f"missing field '{key}'")
    base = _check_type(doc["base_mva"], float, "base_mva")
    horizon = _check_type(doc["horizon"], int, "horizon")
    unit = doc.get("angle_unit", "degrees")
    if unit not in ("degrees", "radians"):
        raise CaseError("angle_unit must be 'degrees' or 'radians'")
    ang = math.radians if unit == "degrees" else float
    per_unit = doc.get("per_unit", False)
    if not isinstance(per_unit, bool):
        raise CaseError("per_unit: wrong type, expected boolean")

    buses = []
    for k, b in enumerate(_listof(doc, "buses")):
        rec = _record(b, _BUS_REQ, {"g_sh": float, "b_sh": float,
                                    "is_reference": bool, "theta0": float}, f"buses[{k}]")
        if "theta0" in rec:
            rec["theta0"] = ang(rec["theta0"])
        buses.append(Bus(**rec))
    branches = []
    for k, br in enumerate(_listof(doc, "branches")):
        rec = _record(br, _BRANCH_REQ, {"b_charge": float, "tap": float, "shift": float,
                                        "i_max": float}, f"branches[{k}]")
        if "shift" in rec:
            rec["shift"] = ang(rec["shift"])
        branches.append(Branch(**rec))
    units = []
    for k, u in enumerate(_listof(doc, "thermal_units")):
        rec = _record(u, _UNIT_REQ, {"name": str}, f"thermal_units[{k}]")
        units.append(ThermalUnit(**rec))
    conds = []
    for k, c in enumerate(doc.get("condensers", []) or []):
        rec = _record(c, _COND_REQ, {"name": str}, f"condensers[{k}]")
        conds.append(SyncCondenser(**rec))

    dem = doc["demand"]
    if not isinstance(dem, dict):
        raise CaseError("demand: expected an object")
    tables = {}
    for kind in ("p", "q"):
        raw = dem.get(kind, {})
        if not isinstance(raw, dict):
            raise CaseError(f"demand.{kind}: expected an object keyed by bus id")
        table = {}
        for key, series in raw.items():
            try:
                bus = int(key)
            except ValueError:
                raise CaseError(f"demand.{kind}: bus key '{key}' is not an integer") from None
            table[bus] = _series(series, f"demand.{kind}.{key}")
        tables[kind] = table
    demand = DemandSeries(horizon=horizon, p_demand=tables["p"], q_demand=tables["q"])
    reserve = ReserveSeries(_series(doc["reserve"], "reserve"))

    case = PowerCase(base_mva=base, buses=tuple(buses), branches=tuple(branches),
                     thermal_units=tuple(units), condensers=tuple(conds),
                     demand=demand, reserve=reserve, per_unit=per_unit,
                     name=str(doc.get("name", "")))
    case = to_per_unit(case)
    problems = validate(case)
    if problems:
        raise CaseError("; ".join(problems))
    return case


def _listof(doc: dict, key: str) -> list:
    val = doc.get(key, [])
    if not isinstance(val, list):
        raise CaseError(f"{key}: expected a list")
    return val


def load_case(path: str | Path) -> PowerCase:
    """Read, validate and per-unit normalize a JSON case file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseError(f"{path}: not valid JSON ({exc})") from exc
    return case_from_dict(doc)


def case_to_dict(case: PowerCase) -> dict:
    """Serialize a case; per-unit cases are written with ``per_unit: true``.

    Angles are written in radians so the round trip is bit-exact.
    """
    def rec(obj) -> dict:
        return {f.name: getattr(obj, f.name) for f in fields(obj)}

    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "horizon": case.horizon,
        "per_unit": case.per_unit,
        "angle_unit": "radians",
        "buses": [rec(b) for b in case.buses],
        "branches": [rec(b) for b in case.branches],
        "thermal_units": [rec(u) for u in case.thermal_units],
        "condensers": [rec(c) for c in case.condensers],
        "demand": {
            "p": {str(k): list(v) for k, v in case.demand.p_demand.items()},
            "q": {str(k): list(v) for k, v in case.demand.q_demand.items()},
        },
        "reserve": list(case.reserve.p_reserve_req),
    }


def save_case(case: PowerCase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(case_to_dict(case), fh, indent=1)
        fh.write("\n")


def builtin_case_path(name: str = "case6") -> Path:
    """Path of a case file shipped with the package."""
    return Path(__file__).parent / "data" / f"{name}.json"


def load_builtin(name: str = "case6") -> PowerCase:
    return load_case(builtin_case_path(name))
