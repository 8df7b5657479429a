"""Decision-vector layout, UC skeleton rows and cost for each problem variant.

The column layout is shared by every variant; variants differ only in
variable bounds, integrality flags and the objective. Rows are emitted for
the on/off logic, minimum up/down windows, reserve, ramping and generation
limits; AC power-flow constraints live in :mod:`ucround.acpf`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .case_model import PowerCase


class Tag(str, enum.Enum):
    UC_ACOPF = "UC_ACOPF"
    RUC_ACOPF = "RUC_ACOPF"
    ACOPF_FIXED = "ACOPF_FIXED"
    FP_RUC = "FP_RUC"


@dataclass(frozen=True)
class Variant:
    tag: Tag
    # ACOPF_FIXED: (u, v, w) binaries, each (n_units, horizon)
    y: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    # FP_RUC: incumbent binary commitment and convex weight
    u_in: np.ndarray | None = None
    alpha: float = 0.5

    def __post_init__(self):
        if self.tag is Tag.ACOPF_FIXED and self.y is None:
            raise ValueError("ACOPF_FIXED requires fixed binaries y")
        if self.tag is Tag.FP_RUC:
            if self.u_in is None:
                raise ValueError("FP_RUC requires u_in")
            if not 0.0 < self.alpha < 1.0:
                raise ValueError("FP_RUC alpha must lie in (0, 1)")

    @classmethod
    def uc(cls) -> "Variant":
        return cls(Tag.UC_ACOPF)

    @classmethod
    def relaxed(cls) -> "Variant":
        return cls(Tag.RUC_ACOPF)

    @classmethod
    def fixed(cls, u, v, w) -> "Variant":
        return cls(Tag.ACOPF_FIXED, y=(np.asarray(u, dtype=float),
                                       np.asarray(v, dtype=float),
                                       np.asarray(w, dtype=float)))

    @classmethod
    def pump(cls, u_in, alpha: float) -> "Variant":
        return cls(Tag.FP_RUC, u_in=np.asarray(u_in, dtype=float), alpha=alpha)


class VariableLayout:
    """Contiguous column blocks.

    Unit blocks (``u v w p q pres``) are ``(n_units, horizon)``; ``qc`` is
    ``(n_condensers, horizon)``; ``vm`` and ``va`` are ``(n_bus, horizon)``.
    Each attribute holds the column index array of its block.
    """

    BLOCKS = ("u", "v", "w", "p", "q", "pres", "qc", "vm", "va")

    def __init__(self, n_units: int, n_condensers: int, n_bus: int, horizon: int):
        self.n_units = n_units
        self.n_condensers = n_condensers
        self.n_bus = n_bus
        self.horizon = horizon
        shapes = {
            "u": (n_units, horizon), "v": (n_units, horizon), "w": (n_units, horizon),
            "p": (n_units, horizon), "q": (n_units, horizon), "pres": (n_units, horizon),
            "qc": (n_condensers, horizon),
            "vm": (n_bus, horizon), "va": (n_bus, horizon),
        }
        start = 0
        self.ranges: dict[str, range] = {}
        for name in self.BLOCKS:
            shape = shapes[name]
            size = shape[0] * shape[1]
            self.ranges[name] = range(start, start + size)
            setattr(self, name, np.arange(start, start + size).reshape(shape))
            start += size
        self.total = start

    @classmethod
    def for_case(cls, case: PowerCase) -> "VariableLayout":
        return cls(case.n_units, case.n_condensers, case.n_bus, case.horizon)

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[getattr(self, name)]

    def binary_columns(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.v.ravel(), self.w.ravel()])

    def block_of(self, col: int) -> str:
        for name, rng in self.ranges.items():
            if col in rng:
                return name
        raise IndexError(col)


@dataclass
class DecisionPoint:
    """Full assignment of the decision vector (per-unit quantities)."""

    layout: VariableLayout
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (self.layout.total,):
            raise ValueError(f"point has {self.x.shape} entries, layout expects {self.layout.total}")

    def __getattr__(self, name):
        if name in VariableLayout.BLOCKS:
            return self.x[getattr(self.layout, name)]
        raise AttributeError(name)

    def copy(self) -> "DecisionPoint":
        return DecisionPoint(self.layout, self.x.copy())

    def with_block(self, name: str, values) -> "DecisionPoint":
        x = self.x.copy()
        x[getattr(self.layout, name)] = values
        return DecisionPoint(self.layout, x)

    def to_dict(self) -> dict:
        return {name: self.x[getattr(self.layout, name)].tolist() for name in VariableLayout.BLOCKS}

    @classmethod
    def from_dict(cls, layout: VariableLayout, doc: dict) -> "DecisionPoint":
        x = np.zeros(layout.total)
        for name in VariableLayout.BLOCKS:
            idx = getattr(layout, name)
            if idx.size == 0:
                continue
            if name not in doc:
                raise ValueError(f"point is missing block '{name}'")
            vals = np.asarray(doc[name], dtype=float)
            if vals.shape != idx.shape:
                raise ValueError(f"block '{name}' has shape {vals.shape}, expected {idx.shape}")
            x[idx] = vals
        return cls(layout, x)


# ----------------------------------------------------------------------------
# linear skeleton

ROW_FAMILIES = ("logic", "min_up", "min_down", "init_up", "init_down", "reserve",
                "ramp_up", "ramp_down", "p_min", "p_max", "q_min", "q_max")


@dataclass
class LinearModel:
    """Sparse rows ``A x (<= or =) rhs`` plus bounds and cost."""

    layout: VariableLayout
    a: sp.csr_matrix
    sense: np.ndarray        # 'L' or 'E' per row
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray      # bool per column
    family: np.ndarray       # row family tag
    cost: "CostDescriptor | None" = None

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    def row_residual(self, x: np.ndarray) -> np.ndarray:
        """Signed violation per row (positive means violated)."""
        r = self.a @ x - self.rhs
        return np.where(self.sense == "E", np.abs(r), np.maximum(r, 0.0))


@dataclass
class CostDescriptor:
    """``const + lin' x + sum(quad * x**2)``."""

    lin: np.ndarray
    quad: np.ndarray
    const: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return float(self.const + self.lin @ x + self.quad @ (x * x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.lin + 2.0 * self.quad * x


class _Rows:
    def __init__(self):
        self.r, self.c, self.v = [], [], []
        self.sense, self.rhs, self.family = [], [], []

    def add(self, cols, vals, sense, rhs, family):
        k = len(self.rhs)
        self.r.extend([k] * len(cols))
        self.c.extend(int(c) for c in cols)
        self.v.extend(float(v) for v in vals)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.family.append(family)


def check_dwell(case: PowerCase) -> None:
    for k, g in enumerate(case.thermal_units):
        if g.dwell0 < 0:
            raise ValueError(f"unit {k}: dwell0 must be nonnegative")
        if g.u0 == 1 and g.dwell0 == 0:
            raise ValueError(f"unit {k}: an initially-on unit needs dwell0 >= 1")


def build_skeleton(case: PowerCase, variant: Variant) -> LinearModel:
    """Linear rows and bounds of the UC skeleton for ``variant``."""
    check_dwell(case)
    L = VariableLayout.for_case(case)
    T = case.horizon
    rows = _Rows()
    for g, unit in enumerate(case.thermal_units):
        u, v, w = L.u[g], L.v[g], L.w[g]
        p, pres, q = L.p[g], L.pres[g], L.q[g]
        for t in range(T):
            # on/off logic
            if t == 0:
                rows.add([u[0], v[0], w[0]], [-1, 1, -1], "E", -unit.u0, "logic")
            else:
                rows.add([u[t - 1], u[t], v[t], w[t]], [1, -1, 1, -1], "E", 0.0, "logic")
            # minimum up / down windows, clipped at the horizon start
            lo = max(0, t - unit.t_up + 1)
            cols = list(v[lo:t + 1]) + [u[t]]
            rows.add(cols, [1.0] * (t + 1 - lo) + [-1.0], "L", 0.0, "min_up")
            lo = max(0, t - unit.t_down + 1)
            cols = list(w[lo:t + 1]) + [u[t]]
            rows.add(cols, [1.0] * (t + 1 - lo) + [1.0], "L", 1.0, "min_down")
            # ramping
            if t == 0:
                rows.add([p[0], pres[0], v[0]], [1, 1, -unit.s_up], "L",
                         unit.p0 + unit.r_up * unit.u0, "ramp_up")
                rows.add([p[0], u[0], w[0]], [-1, -unit.r_down, -unit.s_down], "L",
                         -unit.p0, "ramp_down")
            else:
                rows.add([p[t], pres[t], p[t - 1], u[t - 1], v[t]],
                         [1, 1, -1, -unit.r_up, -unit.s_up], "L", 0.0, "ramp_up")
                rows.add([p[t - 1], p[t], u[t], w[t]],
                         [1, -1, -unit.r_down, -unit.s_down], "L", 0.0, "ramp_down")
            # generation limits
            rows.add([u[t], p[t]], [unit.p_min, -1], "L", 0.0, "p_min")
            rows.add([p[t], pres[t], u[t]], [1, 1, -unit.p_max], "L", 0.0, "p_max")
            rows.add([u[t], q[t]], [unit.q_min, -1], "L", 0.0, "q_min")
            rows.add([q[t], u[t]], [1, -unit.q_max], "L", 0.0, "q_max")
        # commitment carried over from before the horizon
        if unit.u0 == 1 and unit.dwell0 < unit.t_up:
            for t in range(min(T, unit.t_up - unit.dwell0)):
                rows.add([u[t]], [-1.0], "L", -1.0, "init_up")
        if unit.u0 == 0 and unit.dwell0 < unit.t_down:
            for t in range(min(T, unit.t_down - unit.dwell0)):
                rows.add([u[t]], [1.0], "L", 0.0, "init_down")
    req = case.reserve.p_reserve_req
    for t in range(T):
        cols = L.pres[:, t]
        rows.add(cols, [-1.0] * len(cols), "L", -req[t], "reserve")

    a = sp.csr_matrix((rows.v, (rows.r, rows.c)), shape=(len(rows.rhs), L.total))
    lb, ub, integer = variable_bounds(case, variant, L)
    model = LinearModel(layout=L, a=a, sense=np.array(rows.sense), rhs=np.array(rows.rhs),
                        lb=lb, ub=ub, integer=integer, family=np.array(rows.family))
    model.cost = objective(case, variant)
    return model


def variable_bounds(case: PowerCase, variant: Variant, L: VariableLayout | None = None):
    L = L or VariableLayout.for_case(case)
    lb = np.zeros(L.total)
    ub = np.zeros(L.total)
    integer = np.zeros(L.total, dtype=bool)
    T = case.horizon
    for g, unit in enumerate(case.thermal_units):
        for name in ("u", "v", "w"):
            ub[getattr(L, name)[g]] = 1.0
        ub[L.p[g]] = unit.p_max
        lb[L.q[g]] = min(unit.q_min, 0.0)
        ub[L.q[g]] = max(unit.q_max, 0.0)
        ub[L.pres[g]] = unit.p_max - unit.p_min
    for c, cond in enumerate(case.condensers):
        lb[L.qc[c]] = cond.q_min
        ub[L.qc[c]] = cond.q_max
    for i, bus in enumerate(case.buses):
        lb[L.vm[i]] = bus.v_min
        ub[L.vm[i]] = bus.v_max
        lb[L.va[i]] = -np.pi
        ub[L.va[i]] = np.pi
    r = case.ref_bus
    lb[L.va[r]] = ub[L.va[r]] = case.buses[r].theta0
    if variant.tag is Tag.UC_ACOPF:
        integer[L.binary_columns()] = True
    elif variant.tag is Tag.ACOPF_FIXED:
        for name, vals in zip(("u", "v", "w"), variant.y):
            vals = np.asarray(vals, dtype=float).reshape(case.n_units, T)
            lb[getattr(L, name)] = vals
            ub[getattr(L, name)] = vals
    return lb, ub, integer


# ----------------------------------------------------------------------------
# cost

def uc_cost_descriptor(case: PowerCase, L: VariableLayout | None = None) -> CostDescriptor:
    """Generation cost: quadratic in P, fixed, start-up and shut-down terms."""
    L = L or VariableLayout.for_case(case)
    lin = np.zeros(L.total)
    quad = np.zeros(L.total)
    for g, unit in enumerate(case.thermal_units):
        quad[L.p[g]] = unit.a2
        lin[L.p[g]] = unit.a1
        lin[L.u[g]] = unit.a0
        lin[L.v[g]] = unit.c_up
        lin[L.w[g]] = unit.c_down
    return CostDescriptor(lin=lin, quad=quad)


@dataclass(frozen=True)
class FpWeights:
    w_l1: float
    w_uc: float

    @classmethod
    def default(cls, case: PowerCase) -> "FpWeights":
        n = case.horizon * case.n_units
        a2max = max((u.a2 for u in case.thermal_units), default=0.0)
        return cls(w_l1=float(n), w_uc=float(n * a2max) if a2max > 0 else float(n))


def objective(case: PowerCase, variant: Variant, weights: FpWeights | None = None) -> CostDescriptor:
    """Cost of ``variant``; the pump variant mixes L1 distance and UC cost."""
    L = VariableLayout.for_case(case)
    uc = uc_cost_descriptor(case, L)
    if variant.tag is not Tag.FP_RUC:
        return uc
    weights = weights or FpWeights.default(case)
    if not (weights.w_l1 > 0 and weights.w_uc > 0):
        raise ValueError("FP weights must be positive")
    a = variant.alpha
    u_in = np.asarray(variant.u_in, dtype=float).reshape(case.n_units, case.horizon)
    # |u_in - u| = u where u_in = 0, 1 - u where u_in = 1
    l1_lin = np.zeros(L.total)
    l1_lin[L.u] = 1.0 - 2.0 * u_in
    l1_const = float(u_in.sum())
    k1 = (1.0 - a) / weights.w_l1
    k2 = a / weights.w_uc
    return CostDescriptor(lin=k1 * l1_lin + k2 * uc.lin, quad=k2 * uc.quad,
                          const=k1 * l1_const + k2 * uc.const)


def evaluate_cost(point: DecisionPoint, case: PowerCase) -> float:
    """UC cost of ``point`` in dollars."""
    L = VariableLayout.for_case(case)
    if point.x.shape != (L.total,):
        raise ValueError(f"point has {point.x.shape} entries, layout expects {L.total}")
    return uc_cost_descriptor(case, L).value(point.x)
