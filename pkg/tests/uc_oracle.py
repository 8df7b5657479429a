"""Independent straight-loop checks of commitment schedules.

Nothing here uses the package's row builder: on/off logic is checked period
by period and minimum up/down times by walking the maximal runs of each
unit's schedule, with the run in progress at the horizon start extended by
the unit's initial dwell time.
"""

import numpy as np

from ucround.case_model import case_from_dict


def binary_violations(u, v, w, units) -> list[str]:
    out = []
    u, v, w = (np.asarray(a) for a in (u, v, w))
    for g, unit in enumerate(units):
        for t in range(u.shape[1]):
            for name, arr in (("u", u), ("v", v), ("w", w)):
                if arr[g, t] not in (0, 1):
                    out.append(f"{name}[{g},{t}] not binary")
            prev = unit.u0 if t == 0 else u[g, t - 1]
            if u[g, t] - prev != v[g, t] - w[g, t] or v[g, t] + w[g, t] > 1:
                out.append(f"logic at unit {g}, period {t}")
    out += run_violations(u, units)
    return out


def run_violations(u, units) -> list[str]:
    out = []
    u = np.asarray(u)
    T = u.shape[1]
    for g, unit in enumerate(units):
        state = unit.u0
        length = unit.dwell0
        for t in range(T):
            if u[g, t] == state:
                length += 1
                continue
            need = unit.t_up if state == 1 else unit.t_down
            if length < need:
                kind = "min_up" if state == 1 else "min_down"
                out.append(f"{kind} at unit {g}, period {t} (run {length} < {need})")
            state = u[g, t]
            length = 1
    return out


def uc_case(rng: np.random.Generator, n_units: int, horizon: int, reserve: bool = True):
    """Two-bus per-unit case with random unit data; only UC fields matter."""
    units = []
    for _ in range(n_units):
        pmin = float(rng.uniform(0.05, 1.0))
        pmax = pmin + float(rng.uniform(0.1, 2.0))
        ramp = float(rng.uniform(0.05, 1.5))
        u0 = int(rng.integers(0, 2))
        units.append({
            "bus": 1, "a2": float(rng.uniform(0, 5)), "a1": float(rng.uniform(100, 4000)),
            "a0": float(rng.uniform(0, 500)), "c_up": float(rng.uniform(0, 300)), "c_down": 0.0,
            "p_min": pmin, "p_max": pmax, "q_min": -0.5, "q_max": 0.5,
            "r_up": ramp, "r_down": ramp, "s_up": max(ramp, pmin), "s_down": max(ramp, pmin),
            "t_up": int(rng.integers(1, 7)), "t_down": int(rng.integers(1, 7)),
            "u0": u0, "p0": float(rng.uniform(pmin, pmax)) if u0 else 0.0,
            "dwell0": int(rng.integers(1, 9)) if u0 else int(rng.integers(0, 9)),
        })
    total = sum(u["p_max"] for u in units)
    pd = [float(v) for v in rng.uniform(0.1, 0.9, horizon) * total]
    res = [float(v) for v in rng.uniform(0, 0.1, horizon) * total] if reserve else [0.0] * horizon
    doc = {"base_mva": 100.0, "horizon": horizon, "per_unit": True,
           "buses": [{"id": 1, "v_min": 0.9, "v_max": 1.1, "is_reference": True},
                     {"id": 2, "v_min": 0.9, "v_max": 1.1}],
           "branches": [{"from_bus": 1, "to_bus": 2, "r": 0.01, "x": 0.1}],
           "thermal_units": units, "demand": {"p": {"2": pd}, "q": {"2": [0.0] * horizon}},
           "reserve": res}
    return case_from_dict(doc)
