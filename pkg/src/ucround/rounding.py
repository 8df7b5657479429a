"""Rescaling of relaxed commitments and the NR / ER / UC-ER rounding formulas.

All power quantities are per-unit, as in a normalized :class:`PowerCase`.
The enhanced formulas walk the horizon forward. At each period they first
commit the forced units, then visit the free units level by level in
descending ``u_r`` order while three trackers are kept: committed power
``P_G``, slack power ``P_s`` (how far committed output can still be lowered)
and potential power ``P_p`` (ramp headroom usable as reserve).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .case_model import PowerCase


class RescaleMode(str, enum.Enum):
    NONE = "none"
    RE_RUC = "re-ruc"
    RE_POWER = "re-power"


class RoundMode(str, enum.Enum):
    NR = "nr"
    ER = "er"
    UC_ER = "uc-er"


@dataclass(frozen=True)
class RoundParams:
    """Descending level cut points; ``strict_order`` sorts values exactly."""

    levels: tuple[float, ...] = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
    strict_order: bool = False

    def __post_init__(self):
        lv = tuple(float(c) for c in self.levels)
        if any(not 0.0 < c <= 1.0 for c in lv):
            raise ValueError("level cut points must lie in (0, 1]")
        if any(a <= b for a, b in zip(lv, lv[1:])):
            raise ValueError("level cut points must be strictly decreasing")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_width(cls, width: float) -> "RoundParams":
        """Equal-width intervals below 1; width 0 means strict ordering."""
        if width < 0 or width > 1:
            raise ValueError("level width must lie in [0, 1]")
        if width == 0:
            return cls(levels=(), strict_order=True)
        n = int(np.floor(1.0 / width + 1e-9))
        cuts = [1.0 - k * width for k in range(1, n + 1)]
        return cls(levels=tuple(round(c, 12) for c in cuts if c > 1e-12))


@dataclass
class BinarySchedule:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    # periods where committed plus potential power fell short of demand
    shortfall: list[int] = field(default_factory=list)


def rescale(u_relaxed, p_relaxed, case: PowerCase, mode: RescaleMode | str) -> np.ndarray:
    """Rescaled commitment ``u_r`` (not clipped; values >= 1 mean forced)."""
    mode = RescaleMode(mode)
    u = np.asarray(u_relaxed, dtype=float)
    pmin = case.unit_array("p_min")[:, None]
    pmax = case.unit_array("p_max")[:, None]
    if mode is RescaleMode.NONE:
        return u.copy()
    if mode is RescaleMode.RE_RUC:
        return u / (pmin / pmax)
    return np.asarray(p_relaxed, dtype=float) / pmin


def derive_vw(u, u0) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    prev = np.concatenate([np.asarray(u0, dtype=float).reshape(-1, 1), u[:, :-1]], axis=1)
    return np.maximum(0.0, u - prev), np.maximum(0.0, prev - u)


def _schedule(u, case: PowerCase, shortfall=None) -> BinarySchedule:
    u0 = [g.u0 for g in case.thermal_units]
    v, w = derive_vw(u, u0)
    return BinarySchedule(u=u, v=v, w=w, shortfall=list(shortfall or []))


def naive_round(u_r, case: PowerCase) -> BinarySchedule:
    u = (np.asarray(u_r, dtype=float) > 0.5).astype(float)
    return _schedule(u, case)


def _level_groups(values: np.ndarray, free: list[int], params: RoundParams) -> list[list[int]]:
    """Free units grouped into descending levels, unit order inside a level."""
    if not free:
        return []
    if params.strict_order:
        order = sorted(free, key=lambda g: (-values[g], g))
        groups: list[list[int]] = []
        for g in order:
            if groups and values[groups[-1][0]] == values[g]:
                groups[-1].append(g)
            else:
                groups.append([g])
        return groups
    cuts = list(params.levels) + [0.0]
    groups = []
    upper = np.inf
    for k, lo in enumerate(cuts):
        last = k == len(cuts) - 1
        members = [g for g in free
                   if values[g] < upper and (values[g] >= lo or last)]
        if members:
            groups.append(members)
        upper = lo
    return groups


def _enhanced(u_r, p_relaxed, pres_relaxed, case: PowerCase, params: RoundParams,
              enforce_windows: bool) -> BinarySchedule:
    u_r = np.asarray(u_r, dtype=float)
    p_rel = np.asarray(p_relaxed, dtype=float)
    pres = np.asarray(pres_relaxed, dtype=float)
    G, T = u_r.shape
    units = case.thermal_units
    demand = case.total_demand()
    req = np.asarray(case.reserve.p_reserve_req, dtype=float)
    u = np.zeros((G, T))
    p_used = np.zeros((G, T))      # tracked relaxed power after commitment
    shortfall = []

    for t in range(T):
        pg = pp = ps = 0.0

        def commit(g: int) -> None:
            nonlocal pg, pp, ps
            unit = units[g]
            u[g, t] = 1.0
            p_sa = p_rel[g, t] - unit.p_min
            p_new = max(unit.p_min, p_rel[g, t])
            p_used[g, t] = p_new
            if t == 0:
                u_prev, p_prev = unit.u0, (unit.p0 if unit.u0 else 0.0)
            else:
                u_prev = u[g, t - 1]
                p_prev = p_used[g, t - 1] if u_prev else 0.0
            pg += p_new
            pp += (u_prev * (unit.r_up - p_new - pres[g, t] + p_prev)
                   + (1 - u_prev) * (unit.s_up - p_new - pres[g, t]))
            ps += min(unit.r_down - p_prev + p_new, p_sa)

        forced, free = [], []
        for g, unit in enumerate(units):
            state = _window_state(u, g, t, unit) if enforce_windows else 0
            if state == 1 or (state == 0 and u_r[g, t] >= 1.0):
                forced.append(g)
            elif state == 0:
                free.append(g)
        for g in forced:
            commit(g)

        for group in _level_groups(u_r[:, t], free, params):
            if pg > demand[t] and float(pres[:, t] @ u[:, t]) + pp >= req[t]:
                break
            for g in group:
                d_p = units[g].p_min - p_rel[g, t]
                if ps > d_p and pg + units[g].p_min - (ps - d_p) < demand[t]:
                    commit(g)
        if pp + pg <= demand[t]:
            shortfall.append(t)
    return _schedule(u, case, shortfall)


def _window_state(u: np.ndarray, g: int, t: int, unit) -> int:
    """``1`` inside a minimum-up window, ``-1`` inside a minimum-down window,
    ``0`` when the unit is free to change state at ``t``."""
    prev = unit.u0 if t == 0 else int(u[g, t - 1])
    run = 0
    k = t - 1
    while k >= 0 and int(u[g, k]) == prev:
        run += 1
        k -= 1
    if k < 0 and unit.u0 == prev:
        run += unit.dwell0
    if prev == 1 and run < unit.t_up:
        return 1
    if prev == 0 and run < unit.t_down:
        return -1
    return 0


def er_round(u_r, p_relaxed, pres_relaxed, case: PowerCase,
             params: RoundParams | None = None) -> BinarySchedule:
    """Enhanced rounding without minimum up/down enforcement."""
    return _enhanced(u_r, p_relaxed, pres_relaxed, case, params or RoundParams(), False)


def ucer_round(u_r, p_relaxed, pres_relaxed, case: PowerCase,
               params: RoundParams | None = None) -> BinarySchedule:
    """Enhanced rounding that also respects minimum up/down windows."""
    return _enhanced(u_r, p_relaxed, pres_relaxed, case, params or RoundParams(), True)


def round_commitment(mode: RoundMode | str, u_r, p_relaxed, pres_relaxed, case: PowerCase,
                     params: RoundParams | None = None) -> BinarySchedule:
    mode = RoundMode(mode)
    if mode is RoundMode.NR:
        return naive_round(u_r, case)
    if mode is RoundMode.ER:
        return er_round(u_r, p_relaxed, pres_relaxed, case, params)
    return ucer_round(u_r, p_relaxed, pres_relaxed, case, params)
