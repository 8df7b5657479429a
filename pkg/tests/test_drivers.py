import numpy as np
import pytest

from ucround import drivers
from ucround.drivers import FpParams, check_feasibility, feasibility_pump, penalty_sweep
from ucround.formulation import DecisionPoint, Tag
from ucround.pslp import PslpParams, PslpResult

from conftest import all_merit_sequences, is_monotone
from test_acpf import oracle_rows
from uc_oracle import binary_violations


def test_feasible_point_classified_against_oracles(case6, net6, rr_run):
    point, rep = rr_run("re-ruc", "uc-er")
    feas = check_feasibility(point, case6, net6)
    assert feas.fully_feasible and rep.feasible
    # independent checks of the same point
    assert binary_violations(point.u, point.v, point.w, case6.thermal_units) == []
    rows = oracle_rows(point.x, case6, net6)
    n_eq = 2 * case6.n_bus * case6.horizon
    oracle_ac = max(np.abs(rows[:n_eq]).max(), np.maximum(rows[n_eq:], 0).max())
    assert feas.ac_violation == pytest.approx(oracle_ac, abs=1e-12)


def test_classification_levels(case6, net6, rr_run):
    point, _ = rr_run("re-ruc", "uc-er")
    L = point.layout
    # dispatch change breaks AC balance but nothing combinatorial
    p = point.p.copy()
    p[0, 1:] += 0.001                  # G1 is on throughout; period 1 sits on its ramp limit
    bad_ac = point.with_block("p", p).with_block("pres", np.zeros_like(p))   # no reserve needed
    feas = check_feasibility(bad_ac, case6, net6)
    assert feas.uc_feasible and not feas.ac_feasible and not feas.fully_feasible
    # switch G2 off for one isolated period inside its run
    on = np.flatnonzero(point.u[1] > 0.5)
    t = int(on[len(on) // 2])
    x = point.x.copy()
    x[L.u[1, t]] = 0.0
    x[L.p[1, t]] = 0.0
    broken = DecisionPoint(L, x)
    feas = check_feasibility(broken, case6, net6)
    assert not feas.uc_feasible and not feas.fully_feasible
    assert binary_violations(broken.u, broken.v, broken.w, case6.thermal_units) != []
    # fractional commitment fails integrality only
    frac = point.with_block("u", np.where(point.u > 0.5, point.u, 1e-3))
    feas = check_feasibility(frac, case6, net6)
    assert feas.worst["integrality"] == pytest.approx(1e-3)
    assert not feas.fully_feasible


def test_none_nr_is_not_fully_feasible(rr_run):
    _, rep = rr_run("none", "nr")
    assert not rep.feasible


def test_logged_merits_monotone(rr_run):
    for key in (("re-ruc", "uc-er"), ("none", "nr")):
        _, rep = rr_run(*key)
        seqs = all_merit_sequences(rep)
        assert len(seqs) == 2
        assert all(is_monotone(s) for s in seqs)


# --------------------------------------------------------------------------
# pump control flow with a stubbed subproblem solver

def pump_entries(rep):
    return [e for e in rep.trace if "iteration" in e]


class FakeSolver:
    """Returns a fixed fractional commitment so rounding never changes."""

    def __init__(self, level=0.3):
        self.level = level
        self.calls = []

    def __call__(self, inst, start, params=None, lp_options=None):
        x = start.x.copy()
        L = inst.layout
        x[L.u] = self.level
        self.calls.append(inst.variant.alpha if inst.variant.tag is Tag.FP_RUC else None)
        return PslpResult(point=DecisionPoint(L, x), iterations=1, ac_violation=0.0,
                          converged=True, merit_history=[1.0], wall_time=0.0)


def test_pump_alpha_sequence_and_resets(case6, monkeypatch):
    fake = FakeSolver()
    monkeypatch.setattr(drivers, "solve_nlp", fake)
    fp = FpParams(maxit=50, maxrst=2, s_flips=5, rng_seed=3)
    u0 = np.zeros((3, 24))
    _, rep = feasibility_pump(case6, u0, fp, PslpParams(), formula="nr")
    entries = pump_entries(rep)
    alphas = [e["alpha"] for e in entries]
    # halving until the next alpha sits within delta_alpha of a seen pair
    assert alphas[:4] == pytest.approx([0.75, 0.375, 0.1875, 0.09375])
    resets = [k for k, e in enumerate(entries) if e["reset"]]
    assert resets[0] == 3
    # after reset r the pump restarts from alpha0 / (r + 1)
    assert alphas[resets[0] + 1] == pytest.approx(0.75 / 2)
    assert rep.fp_resets == 3 and rep.fp_exit == "maxrst"
    assert len(resets) == 3
    # the fallthrough solves one fixed-commitment problem
    assert fake.calls[-1] is None and len(fake.calls) == len(entries) + 1


def test_pump_reset_flips_exactly_s_components(case6, monkeypatch):
    seen_u = []

    class Recorder(FakeSolver):
        def __call__(self, inst, start, params=None, lp_options=None):
            if inst.variant.u_in is not None:
                seen_u.append(np.array(inst.variant.u_in))
            return super().__call__(inst, start, params, lp_options)

    monkeypatch.setattr(drivers, "solve_nlp", Recorder())
    fp = FpParams(maxit=6, maxrst=5, s_flips=7, rng_seed=0)
    _, rep = feasibility_pump(case6, np.zeros((3, 24)), fp, PslpParams(), formula="nr")
    k = next(i for i, e in enumerate(pump_entries(rep)) if e["reset"])
    # rounding gives all zeros, so the reset input has exactly s ones
    assert seen_u[k + 1].sum() == 7


def test_pump_is_deterministic_per_seed(case6, monkeypatch):
    monkeypatch.setattr(drivers, "solve_nlp", FakeSolver())
    fp = FpParams(maxit=12, maxrst=3, s_flips=10, rng_seed=42)
    a = feasibility_pump(case6, np.zeros((3, 24)), fp, PslpParams(), formula="nr")[1]
    b = feasibility_pump(case6, np.zeros((3, 24)), fp, PslpParams(), formula="nr")[1]
    assert [e["distance"] for e in pump_entries(a)] == [e["distance"] for e in pump_entries(b)]


def test_pump_stops_when_integral(case6, monkeypatch):
    monkeypatch.setattr(drivers, "solve_nlp", FakeSolver(level=1.0))
    _, rep = feasibility_pump(case6, np.ones((3, 24)), FpParams(), PslpParams())
    assert rep.fp_iterations == 1 and rep.fp_exit.startswith("integral")


def test_fp_params_validated(case6):
    with pytest.raises(ValueError):
        FpParams(alpha0=1.5)
    with pytest.raises(ValueError):
        FpParams(s_flips=1000).flips(case6)
    assert FpParams().flips(case6) == 72


def test_penalty_sweep_single_row_matches_direct(case6, rr_run):
    reps = penalty_sweep(case6, [5e6], "re-ruc", "uc-er")
    _, direct = rr_run("re-ruc", "uc-er")
    assert len(reps) == 1
    assert reps[0].cost == pytest.approx(direct.cost, rel=1e-9)
    assert reps[0].commitment == direct.commitment
    with pytest.raises(ValueError):
        penalty_sweep(case6, [])


@pytest.mark.slow
def test_penalty_sweep_ucer_all_feasible(case6):
    reps = penalty_sweep(case6, [5e3, 5e4, 5e5, 5e6, 5e7], "none", "uc-er")
    assert [r.penalty for r in reps] == [5e3, 5e4, 5e5, 5e6, 5e7]
    assert all(r.feasible for r in reps), [(r.penalty, r.worst) for r in reps if not r.feasible]
