"""Penalized sequential linear programming with a trust region.

Each iteration linearizes the AC rows and the quadratic cost at the current
point and solves the LP

    min  grad_f' x + mu * (sum s+ + s- + sum s)
    s.t. linear skeleton rows
         h_eq(x_k) + J_eq (x - x_k) = s+ - s-
         h_in(x_k) + J_in (x - x_k) <= s
         |x_j - x_k,j| <= delta * range_j,  lb <= x <= ub

The step is judged with the exact merit ``f(x) + mu * sum(AC violations)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .acpf import AcModel
from .case_model import PowerCase
from .formulation import (CostDescriptor, DecisionPoint, FpWeights, LinearModel, Tag,
                          Variant, build_skeleton, objective)
from .lp_core import Basis, LpProblem, LpStatus, SolveOptions, solve
from .network import NetworkMatrices, assemble

_log = logging.getLogger(__name__)


class PslpError(RuntimeError):
    """An LP subproblem could not be solved."""


@dataclass(frozen=True)
class PslpParams:
    eps_stop: float = 1e-4
    mu: float = 5e6
    rho0: float = 1e-6
    rho1: float = 0.25
    rho2: float = 0.75
    beta: float = 0.5
    delta_lb: float = 1e-6
    delta0: float = 0.2
    expand: float = 2.0
    max_iter: int = 200
    feas_tol: float = 1e-6
    second_order: bool = True

    def __post_init__(self):
        if not 0 < self.rho0 <= self.rho1 < self.rho2 < 1:
            raise ValueError("need 0 < rho0 <= rho1 < rho2 < 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not self.expand > 1:
            raise ValueError("expand must exceed 1")
        if not 0 < self.delta_lb < self.delta0:
            raise ValueError("need 0 < delta_lb < delta0")
        if self.mu <= 0 or self.eps_stop <= 0 or self.max_iter < 1:
            raise ValueError("mu, eps_stop and max_iter must be positive")


@dataclass
class PslpResult:
    point: DecisionPoint
    iterations: int
    ac_violation: float
    converged: bool
    merit_history: list[float]
    wall_time: float
    objective: float = math.nan
    linear_violation: float = 0.0
    trace: list[dict] = field(default_factory=list)
    stop_reason: str = ""


class NlpInstance:
    """Skeleton rows, cost and AC model of one problem variant."""

    def __init__(self, case: PowerCase, variant: Variant, net: NetworkMatrices | None = None,
                 weights: FpWeights | None = None):
        self.case = case
        self.variant = variant
        self.net = net or assemble(case)
        self.model: LinearModel = build_skeleton(case, variant)
        self.cost: CostDescriptor = objective(case, variant, weights)
        self.ac = AcModel(case, self.net)
        self.layout = self.model.layout

    def merit(self, x: np.ndarray, mu: float) -> tuple[float, float, float]:
        """``(merit, cost, max AC violation)`` at ``x``."""
        viol = self.ac.violation(self.ac.values(x))
        f = self.cost.value(x)
        return f + mu * float(viol.sum()), f, float(viol.max(initial=0.0))


def flat_start(case: PowerCase, variant: Variant) -> DecisionPoint:
    """Modified flat start: mid-range voltages, commitment from the variant."""
    from .formulation import VariableLayout

    L = VariableLayout.for_case(case)
    x = np.zeros(L.total)
    T = case.horizon
    for i, bus in enumerate(case.buses):
        x[L.vm[i]] = 0.5 * (bus.v_min + bus.v_max)
        x[L.va[i]] = bus.theta0 if bus.is_reference else 0.0
    if variant.tag is Tag.ACOPF_FIXED:
        u, v, w = (np.asarray(a, dtype=float).reshape(case.n_units, T) for a in variant.y)
        x[L.u], x[L.v], x[L.w] = u, v, w
        pmin = case.unit_array("p_min")[:, None]
        x[L.p] = pmin * u
    else:
        for g, unit in enumerate(case.thermal_units):
            x[L.u[g]] = float(unit.u0)
            x[L.p[g]] = unit.p0 if unit.u0 else 0.0
        if variant.tag is Tag.FP_RUC:
            x[L.u] = np.asarray(variant.u_in, dtype=float).reshape(case.n_units, T)
    return DecisionPoint(L, x)


def _ranges(lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    r = ub - lb
    return np.where(np.isfinite(r) & (r > 0), r, np.where(np.isfinite(r), 0.0, 1.0))


def project_linear(model: LinearModel, x0: np.ndarray, opts: SolveOptions | None = None):
    """Closest point (weighted L1) to ``x0`` satisfying the linear rows.

    Rows that cannot be satisfied within the bounds stay violated by the
    smallest total amount; returns ``(x, row_excess)`` where ``row_excess``
    is that residual violation per row (zero for satisfiable systems).
    """
    a = model.a
    m, n = a.shape
    lb, ub = model.lb, model.ub
    x0 = np.clip(x0, lb, ub)
    rng = _ranges(lb, ub)
    free = rng > 0
    resid = model.row_residual(x0)
    if resid.max(initial=0.0) <= 1e-9:
        return x0, np.zeros(m)
    # columns: x, d+ (free cols), d- (free cols), e+ (rows), e- (eq rows)
    fidx = np.flatnonzero(free)
    nf = len(fidx)
    eq = np.flatnonzero(model.sense == "E")
    ne = len(eq)
    sel = sp.csr_matrix((np.ones(nf), (np.arange(nf), fidx)), shape=(nf, n))
    link = sp.hstack([sel, -sp.identity(nf), sp.identity(nf),
                      sp.csr_matrix((nf, m + ne))])
    e_minus = sp.csr_matrix((np.ones(ne), (eq, np.arange(ne))), shape=(m, ne))
    rows = sp.hstack([a, sp.csr_matrix((m, 2 * nf)), -sp.identity(m), e_minus])
    big = 1e3 * max(1.0, float(len(fidx)))
    c = np.concatenate([np.zeros(n), 1.0 / rng[fidx], 1.0 / rng[fidx],
                        np.full(m + ne, big)])
    lp = LpProblem(sp.vstack([rows, link]), np.concatenate([model.sense, np.full(nf, "E")]),
                   np.concatenate([model.rhs, x0[fidx]]),
                   np.concatenate([lb, np.zeros(2 * nf + m + ne)]),
                   np.concatenate([ub, np.full(2 * nf + m + ne, np.inf)]), c)
    sol = solve(lp, opts)
    if not sol.optimal:
        raise PslpError(f"projection onto linear rows failed: {sol.status.value}")
    x = np.clip(sol.x[:n], lb, ub)
    return x, model.row_residual(x)


def solve_nlp(instance: NlpInstance, init: DecisionPoint, params: PslpParams | None = None,
              lp_options: SolveOptions | None = None) -> PslpResult:
    """Run PSLP from ``init`` and return the last accepted iterate."""
    params = params or PslpParams()
    start = time.perf_counter()
    model = instance.model
    ac = instance.ac
    cost = instance.cost
    mu = params.mu
    lb, ub = model.lb, model.ub
    n = model.layout.total
    rng = _ranges(lb, ub)

    x, excess = project_linear(model, np.asarray(init.x, dtype=float), lp_options)
    # unsatisfiable rows are relaxed by their residual so every LP stays feasible
    rhs_lin = model.rhs + np.where(model.sense == "E",
                                   (model.a @ x - model.rhs) * (excess > 0), excess)
    lin_violation = float(excess.max(initial=0.0))

    n_eq, n_in = ac.n_eq, ac.n_ineq
    m_lin = model.n_rows
    n_s = 2 * n_eq + n_in
    slack_block = sp.vstack([
        sp.csr_matrix((m_lin, n_s)),
        sp.hstack([-sp.identity(n_eq), sp.identity(n_eq), sp.csr_matrix((n_eq, n_in))]),
        sp.hstack([sp.csr_matrix((n_in, 2 * n_eq)), -sp.identity(n_in)]),
    ]).tocsr()
    sense = np.concatenate([model.sense, np.full(n_eq, "E"), np.full(n_in, "L")])
    c_slack = np.full(n_s, mu)

    vals = ac.values(x)
    phi, f, vmax = instance.merit(x, mu)
    history = [phi]
    trace: list[dict] = []
    delta = params.delta0
    basis: Basis | None = None
    it = 0
    stop = "max_iter"
    stationary = False
    while it < params.max_iter:
        it += 1
        jac = ac.jacobian(x)
        a = sp.vstack([sp.hstack([model.a, sp.csr_matrix((m_lin, 0))]).tocsr(), jac]).tocsr()
        a = sp.hstack([a, slack_block]).tocsr()
        rhs = np.concatenate([rhs_lin, jac @ x - vals])
        rad = delta * rng
        xlb = np.maximum(lb, x - rad)
        xub = np.minimum(ub, x + rad)
        grad = cost.gradient(x)
        c = np.concatenate([grad, c_slack])
        lp = LpProblem(a, sense, rhs, np.concatenate([xlb, np.zeros(n_s)]),
                       np.concatenate([xub, np.full(n_s, np.inf)]), c)
        sol = solve(lp, lp_options, warm=basis)
        if not sol.optimal:
            raise PslpError(f"PSLP iteration {it}: LP subproblem returned {sol.status.value}")
        basis = sol.basis
        x_new = sol.x[:n]
        model_val = f + grad @ (x_new - x) + mu * float(sol.x[n:].sum())
        pred = phi - model_val
        step = float(np.max(np.abs(x_new - x), initial=0.0))
        if pred <= 1e-12 * max(1.0, abs(phi)) or step == 0.0:
            trace.append(dict(iteration=it, delta=delta, ratio=math.nan, merit=phi,
                              violation=vmax, accepted=False, step=step))
            _log.info("pslp it=%d delta=%.3e ratio=nan merit=%.9e viol=%.3e accepted=0 (stationary)",
                      it, delta, phi, vmax)
            stop, stationary = "stationary", True
            break
        vals_new = ac.values(x_new)
        phi_new, f_new, vmax_new = instance.merit(x_new, mu)
        if not math.isfinite(phi_new):
            raise PslpError(f"PSLP iteration {it}: non-finite merit")
        ratio = (phi - phi_new) / pred
        soc = False
        if params.second_order and ratio < params.rho2:
            # re-linearize the AC rows around the trial point with the same Jacobian
            lp.rhs = np.concatenate([rhs_lin, jac @ x_new - vals_new])
            sol2 = solve(lp, lp_options, warm=basis)
            if sol2.optimal:
                x_soc = sol2.x[:n]
                phi_soc, f_soc, vmax_soc = instance.merit(x_soc, mu)
                if math.isfinite(phi_soc) and phi_soc < phi_new:
                    x_new, phi_new, f_new, vmax_new = x_soc, phi_soc, f_soc, vmax_soc
                    vals_new = ac.values(x_new)
                    step = float(np.max(np.abs(x_new - x), initial=0.0))
                    ratio = (phi - phi_new) / pred
                    soc = True
        accepted = ratio >= params.rho0 and phi_new < phi
        trace.append(dict(iteration=it, delta=delta, ratio=ratio, merit=phi_new if accepted else phi,
                          violation=vmax_new if accepted else vmax, accepted=accepted, step=step, soc=soc))
        _log.info("pslp it=%d delta=%.3e ratio=%.6e merit=%.9e viol=%.3e accepted=%d",
                  it, delta, ratio, phi_new if accepted else phi,
                  vmax_new if accepted else vmax, int(accepted))
        if accepted:
            x, vals, phi, f, vmax = x_new, vals_new, phi_new, f_new, vmax_new
            history.append(phi)
        if ratio < params.rho1:
            delta *= params.beta
        elif ratio > params.rho2:
            delta = min(1.0, delta * params.expand)
        if accepted and step <= params.eps_stop:
            stop, stationary = "step", True
            break
        if delta <= params.delta_lb:
            stop, stationary = "trust_region", True
            break

    point = DecisionPoint(model.layout, x)
    return PslpResult(point=point, iterations=it, ac_violation=vmax,
                      converged=stationary and vmax <= params.feas_tol and lin_violation <= params.feas_tol,
                      merit_history=history, wall_time=time.perf_counter() - start,
                      objective=f, linear_violation=lin_violation, trace=trace, stop_reason=stop)
