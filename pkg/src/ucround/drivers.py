"""Relax-and-round pipeline, objective feasibility pump and feasibility checks."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import acpf
from .case_model import PowerCase
from .formulation import (DecisionPoint, FpWeights, Variant, VariableLayout, build_skeleton,
                          evaluate_cost, variable_bounds)
from .network import NetworkMatrices, assemble
from .pslp import NlpInstance, PslpError, PslpParams, PslpResult, flat_start, solve_nlp
from .rounding import (BinarySchedule, RescaleMode, RoundMode, RoundParams, derive_vw,
                       naive_round, rescale, round_commitment)

_log = logging.getLogger(__name__)

INT_TOL = 1e-6
UC_FAMILIES = ("logic", "min_up", "min_down", "init_up", "init_down", "ramp_up", "ramp_down")


# ----------------------------------------------------------------------------
# feasibility classification

@dataclass
class FeasibilityReport:
    uc_feasible: bool
    ac_feasible: bool
    fully_feasible: bool
    ac_violation: float
    worst: dict[str, float] = field(default_factory=dict)

    def failing(self, tol: float) -> list[str]:
        return sorted(k for k, v in self.worst.items() if v > tol)


def check_feasibility(point: DecisionPoint, case: PowerCase, net: NetworkMatrices | None = None,
                      tol: float = 1e-6) -> FeasibilityReport:
    """Two-level classification plus full feasibility of ``point``.

    UC-feasible covers the on/off logic, minimum up/down windows (including
    the carried-over history) and ramping; AC-feasible covers power balance
    and line currents. Full feasibility adds generation and reactive limits,
    reserve, variable domains and integrality of the commitment.
    """
    net = net or assemble(case)
    model = build_skeleton(case, Variant.uc())
    x = point.x
    resid = model.row_residual(x)
    worst: dict[str, float] = {}
    for fam in np.unique(model.family):
        worst[str(fam)] = float(resid[model.family == fam].max(initial=0.0))
    lb, ub, _ = variable_bounds(case, Variant.uc(), model.layout)
    L = model.layout
    for name in VariableLayout.BLOCKS:
        idx = getattr(L, name).ravel()
        if idx.size:
            bviol = np.maximum(np.maximum(lb[idx] - x[idx], x[idx] - ub[idx]), 0.0)
            worst[f"bounds_{name}"] = float(bviol.max(initial=0.0))
    b = L.binary_columns()
    worst["integrality"] = float(np.abs(x[b] - np.round(x[b])).max(initial=0.0))
    res = acpf.residual(point, case, net)
    worst["p_balance"] = float(np.abs(res.p_balance).max(initial=0.0))
    worst["q_balance"] = float(np.abs(res.q_balance).max(initial=0.0))
    worst["line_from"] = float(np.maximum(res.i_from, 0.0).max(initial=0.0))
    worst["line_to"] = float(np.maximum(res.i_to, 0.0).max(initial=0.0))
    uc_ok = all(worst.get(f, 0.0) <= tol for f in UC_FAMILIES)
    ac_v = max(worst["p_balance"], worst["q_balance"], worst["line_from"], worst["line_to"])
    ac_ok = ac_v <= tol
    full = all(v <= tol for v in worst.values())
    return FeasibilityReport(uc_ok, ac_ok, full, ac_v, worst)


# ----------------------------------------------------------------------------
# reports

@dataclass
class RunReport:
    rescale: str
    round: str
    penalty: float
    iter1: int = 0
    acfeas1: float = math.nan
    iter2: int = 0
    acfeas2: float = math.nan
    feasible: bool = False
    cost: float = math.nan
    time_s: float = 0.0
    uc_feasible: bool = False
    ac_feasible: bool = False
    pipeline: str = "relax-round"
    commitment: list[list[int]] = field(default_factory=list)
    fp_iterations: int = 0
    fp_resets: int = 0
    fp_total_pslp: int = 0
    fp_exit: str = ""
    seed: int | None = None
    error: str = ""
    worst: dict[str, float] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _finish(report: RunReport, point: DecisionPoint, case: PowerCase, net, t0: float) -> RunReport:
    feas = check_feasibility(point, case, net)
    report.feasible = feas.fully_feasible
    report.uc_feasible = feas.uc_feasible
    report.ac_feasible = feas.ac_feasible
    report.worst = feas.worst
    report.cost = evaluate_cost(point, case)
    report.commitment = np.round(point.u).astype(int).tolist()
    report.time_s = time.perf_counter() - t0
    return report


def _fixed_variant(schedule_u: np.ndarray, case: PowerCase) -> Variant:
    u = np.round(np.asarray(schedule_u, dtype=float))
    v, w = derive_vw(u, [g.u0 for g in case.thermal_units])
    return Variant.fixed(u, v, w)


# ----------------------------------------------------------------------------
# relax-and-round

def relax_and_round(case: PowerCase, rescale_mode: RescaleMode | str = RescaleMode.NONE,
                    formula: RoundMode | str = RoundMode.UC_ER,
                    pslp1: PslpParams | None = None, pslp2: PslpParams | None = None,
                    round_params: RoundParams | None = None,
                    net: NetworkMatrices | None = None) -> tuple[DecisionPoint, RunReport]:
    """Solve the relaxation, rescale, round, then solve the fixed-commitment ACOPF."""
    t0 = time.perf_counter()
    net = net or assemble(case)
    pslp1 = pslp1 or PslpParams()
    pslp2 = pslp2 or PslpParams()
    rescale_mode, formula = RescaleMode(rescale_mode), RoundMode(formula)
    report = RunReport(rescale=rescale_mode.value, round=formula.value, penalty=pslp1.mu)

    relaxed_inst = NlpInstance(case, Variant.relaxed(), net)
    try:
        r1 = solve_nlp(relaxed_inst, flat_start(case, relaxed_inst.variant), pslp1)
    except PslpError as exc:
        report.error = f"step 1: {exc}"
        point = flat_start(case, relaxed_inst.variant)
        return point, _finish(report, point, case, net, t0)
    report.iter1, report.acfeas1 = r1.iterations, r1.ac_violation
    report.trace.append({"step": 1, "trace": r1.trace})

    rel = r1.point
    u_r = rescale(rel.u, rel.p, case, rescale_mode)
    sched = round_commitment(formula, u_r, rel.p, rel.pres, case, round_params)
    variant = Variant.fixed(sched.u, sched.v, sched.w)
    fixed_inst = NlpInstance(case, variant, net)
    start = flat_start(case, variant)
    try:
        r2 = solve_nlp(fixed_inst, start, pslp2)
        point = r2.point
        report.iter2, report.acfeas2 = r2.iterations, r2.ac_violation
        report.trace.append({"step": 4, "trace": r2.trace})
    except PslpError as exc:
        report.error = f"step 4: {exc}"
        point = start
    return point, _finish(report, point, case, net, t0)


def penalty_sweep(case: PowerCase, penalties, rescale_mode=RescaleMode.NONE,
                  formula=RoundMode.UC_ER, pslp: PslpParams | None = None,
                  round_params: RoundParams | None = None) -> list[RunReport]:
    """One relax-and-round run per Step-1 penalty; Step 4 keeps ``pslp.mu``."""
    penalties = list(penalties)
    if not penalties:
        raise ValueError("penalty list must not be empty")
    base = pslp or PslpParams()
    net = assemble(case)
    out = []
    for mu in penalties:
        try:
            _, rep = relax_and_round(case, rescale_mode, formula, replace(base, mu=float(mu)),
                                     base, round_params, net)
        except Exception as exc:  # keep the sweep going
            rep = RunReport(rescale=RescaleMode(rescale_mode).value,
                            round=RoundMode(formula).value, penalty=float(mu),
                            error=f"{type(exc).__name__}: {exc}")
        out.append(rep)
    return out


# ----------------------------------------------------------------------------
# feasibility pump

@dataclass(frozen=True)
class FpParams:
    maxit: int = 50
    maxrst: int = 3
    alpha0: float = 0.75
    phi_alpha: float = 0.5
    delta_alpha: float = 0.075
    s_flips: int | None = None       # default: every (unit, period) component
    w_l1: float | None = None
    w_uc: float | None = None
    rng_seed: int = 0
    penalty: float = 500.0

    def __post_init__(self):
        if not 0 < self.alpha0 < 1:
            raise ValueError("alpha0 must lie in (0, 1)")
        if not 0 < self.phi_alpha < 1:
            raise ValueError("phi_alpha must lie in (0, 1)")
        if self.maxit < 1 or self.maxrst < 0:
            raise ValueError("maxit must be positive and maxrst nonnegative")
        if self.s_flips is not None and self.s_flips < 0:
            raise ValueError("s_flips must be nonnegative")

    def weights(self, case: PowerCase) -> FpWeights:
        d = FpWeights.default(case)
        return FpWeights(self.w_l1 or d.w_l1, self.w_uc or d.w_uc)

    def flips(self, case: PowerCase) -> int:
        n = case.n_units * case.horizon
        s = n if self.s_flips is None else self.s_flips
        if s > n:
            raise ValueError(f"s_flips={s} exceeds the {n} commitment components")
        return s


def _is_integral(u: np.ndarray) -> bool:
    return bool(np.all(np.abs(u - np.round(u)) <= INT_TOL))


def _round_fp(point: DecisionPoint, case, rescale_mode, formula, round_params) -> np.ndarray:
    u_r = rescale(point.u, point.p, case, rescale_mode)
    return round_commitment(formula, u_r, point.p, point.pres, case, round_params).u


def feasibility_pump(case: PowerCase, u_init, fp: FpParams | None = None,
                     pslp: PslpParams | None = None,
                     rescale_mode: RescaleMode | str = RescaleMode.NONE,
                     formula: RoundMode | str = RoundMode.NR,
                     round_params: RoundParams | None = None,
                     init: DecisionPoint | None = None,
                     net: NetworkMatrices | None = None) -> tuple[DecisionPoint, RunReport]:
    """Objective feasibility pump started from the binary matrix ``u_init``.

    ``pslp`` configures the final fixed-commitment ACOPF solve; the pump's
    own subproblems use the same parameters with ``fp.penalty``.
    """
    t0 = time.perf_counter()
    fp = fp or FpParams()
    pslp = pslp or PslpParams()
    net = net or assemble(case)
    rescale_mode, formula = RescaleMode(rescale_mode), RoundMode(formula)
    G, T = case.n_units, case.horizon
    u_in = np.round(np.asarray(u_init, dtype=float)).reshape(G, T)
    weights = fp.weights(case)
    n_flip = fp.flips(case)
    rng = np.random.default_rng(fp.rng_seed)
    pump_params = replace(pslp, mu=fp.penalty)
    report = RunReport(rescale=rescale_mode.value, round=formula.value, penalty=fp.penalty,
                       pipeline="fp", seed=fp.rng_seed)

    alpha = fp.alpha0
    seen: list[tuple[np.ndarray, float]] = [(u_in.copy(), alpha)]
    iterates: list[tuple[DecisionPoint, np.ndarray]] = []
    x_prev = init
    rst = 0
    k = 0
    exit_reason = "maxit"
    while k < fp.maxit:
        k += 1
        variant = Variant.pump(u_in, alpha)
        inst = NlpInstance(case, variant, net, weights)
        start = x_prev if x_prev is not None else flat_start(case, variant)
        try:
            res = solve_nlp(inst, start, pump_params)
        except PslpError as exc:
            _log.warning("fp it=%d skipped: %s", k, exc)
            report.trace.append(dict(iteration=k, alpha=alpha, skipped=str(exc)))
            alpha *= fp.phi_alpha
            continue
        report.fp_total_pslp += res.iterations
        x_hat = res.point
        x_prev = x_hat
        u_hat = x_hat.u
        entry = dict(iteration=k, alpha=alpha, pslp_iterations=res.iterations,
                     ac_violation=res.ac_violation, reset=False,
                     distance=float(np.abs(u_hat - u_in).sum()), merits=res.merit_history)
        _log.info("fp it=%d alpha=%.6f pslp=%d dist=%.6e", k, alpha, res.iterations,
                  entry["distance"])
        if _is_integral(u_hat):
            report.trace.append(entry)
            report.fp_iterations, report.fp_resets = k, rst
            report.fp_exit = "integral"
            point = _integral_point(x_hat, case, net, pslp, report)
            return point, _finish(report, point, case, net, t0)
        u_next = _round_fp(x_hat, case, rescale_mode, formula, round_params)
        iterates.append((x_hat, u_next.copy()))
        alpha_next = alpha * fp.phi_alpha
        stationary = any(np.array_equal(u_next, uk) and ak - alpha_next <= fp.delta_alpha
                         for uk, ak in seen)
        if stationary:
            flat_idx = rng.choice(G * T, size=n_flip, replace=False)
            flipped = u_next.ravel().copy()
            flipped[flat_idx] = 1.0 - flipped[flat_idx]
            u_next = flipped.reshape(G, T)
            rst += 1
            entry["reset"] = True
            alpha_next = fp.alpha0 / (rst + 1)
        report.trace.append(entry)
        if rst > fp.maxrst:
            exit_reason = "maxrst"
            break
        u_in = u_next
        alpha = alpha_next
        seen.append((u_in.copy(), alpha))

    report.fp_iterations, report.fp_resets = k, rst
    report.fp_exit = exit_reason
    if not iterates:
        report.error = "no successful pump iterate"
        point = flat_start(case, Variant.relaxed())
        return point, _finish(report, point, case, net, t0)
    dists = [float(np.abs(p.u - ur).sum()) for p, ur in iterates]
    h = int(np.argmin(dists))
    variant = _fixed_variant(iterates[h][1], case)
    inst = NlpInstance(case, variant, net)
    try:
        res = solve_nlp(inst, flat_start(case, variant), pslp)
        point = res.point
        report.iter2, report.acfeas2 = res.iterations, res.ac_violation
        report.trace.append({"step": "final", "trace": res.trace})
    except PslpError as exc:
        report.error = f"final ACOPF: {exc}"
        point = flat_start(case, variant)
    return point, _finish(report, point, case, net, t0)


def _integral_point(x_hat: DecisionPoint, case: PowerCase, net, pslp: PslpParams,
                    report: RunReport) -> DecisionPoint:
    """Snap the binaries of an integral pump iterate; polish if that breaks feasibility."""
    u = np.round(x_hat.u)
    v, w = derive_vw(u, [g.u0 for g in case.thermal_units])
    snapped = x_hat.with_block("u", u).with_block("v", v).with_block("w", w)
    if check_feasibility(snapped, case, net).fully_feasible:
        return snapped
    variant = Variant.fixed(u, v, w)
    inst = NlpInstance(case, variant, net)
    start = snapped.copy()
    try:
        res = solve_nlp(inst, start, pslp)
    except PslpError as exc:
        report.error = f"polish: {exc}"
        return snapped
    report.iter2, report.acfeas2 = res.iterations, res.ac_violation
    report.trace.append({"step": "polish", "trace": res.trace})
    report.fp_exit = "integral+polish"
    return res.point


def relax_and_pump(case: PowerCase, rescale_mode=RescaleMode.RE_RUC, formula=RoundMode.UC_ER,
                   fp: FpParams | None = None, pslp: PslpParams | None = None,
                   round_params: RoundParams | None = None) -> tuple[DecisionPoint, RunReport]:
    """Relaxation, naive initial rounding, then the pump."""
    t0 = time.perf_counter()
    pslp = pslp or PslpParams()
    net = assemble(case)
    inst = NlpInstance(case, Variant.relaxed(), net)
    r1 = solve_nlp(inst, flat_start(case, inst.variant), pslp)
    u0 = naive_round(r1.point.u, case).u
    point, rep = feasibility_pump(case, u0, fp, pslp, rescale_mode, formula, round_params,
                                  init=r1.point, net=net)
    rep.iter1, rep.acfeas1 = r1.iterations, r1.ac_violation
    rep.trace.insert(0, {"step": 1, "trace": r1.trace})
    rep.fp_total_pslp += r1.iterations + rep.iter2
    rep.time_s = time.perf_counter() - t0
    return point, rep
