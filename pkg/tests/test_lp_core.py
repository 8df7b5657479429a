from fractions import Fraction

import numpy as np
import pytest

from ucround.lp_core import LpProblem, LpStatus, SolveOptions, solve, write_lp


# --------------------------------------------------------------------------
# oracle: dense two-phase tableau simplex in exact rationals, Bland's rule

def tableau_simplex(a, sense, rhs, lb, ub, c):
    """Return ``(status, objective)`` with status in optimal/infeasible/unbounded.

    Bounds are moved into rows: ``x = lb + z`` with ``z >= 0`` and ``z <= ub - lb``
    as an extra row when ``ub`` is finite (lb must be finite).
    """
    F = Fraction
    m, n = len(rhs), len(c)
    rows, b = [], []
    for i in range(m):
        shift = sum(F(a[i][j]) * F(lb[j]) for j in range(n))
        rows.append(([F(a[i][j]) for j in range(n)], sense[i]))
        b.append(F(rhs[i]) - shift)
    for j in range(n):
        if np.isfinite(ub[j]):
            e = [F(0)] * n
            e[j] = F(1)
            rows.append((e, "L"))
            b.append(F(ub[j]) - F(lb[j]))
    n_slack = sum(1 for _, s in rows if s == "L")
    M = len(rows)
    width = n + n_slack + M
    tab = []
    k = 0
    for i, (coef, s) in enumerate(rows):
        row = coef + [F(0)] * (n_slack + M)
        if s == "L":
            row[n + k] = F(1)
            k += 1
        if b[i] < 0:
            row = [-v for v in row]
            b[i] = -b[i]
        row[n + n_slack + i] = F(1)
        tab.append(row + [b[i]])
    basis = [n + n_slack + i for i in range(M)]
    art = set(basis)

    def pivot(r, q):
        p = tab[r][q]
        tab[r] = [v / p for v in tab[r]]
        for i in range(M):
            if i != r and tab[i][q] != 0:
                f = tab[i][q]
                tab[i] = [vi - f * vr for vi, vr in zip(tab[i], tab[r])]
        basis[r] = q

    def run(cost, allowed):
        while True:
            cb = [cost[basis[i]] for i in range(M)]
            enter = None
            for j in range(width):
                if j in basis or j not in allowed:
                    continue
                red = cost[j] - sum(cb[i] * tab[i][j] for i in range(M))
                if red < 0:
                    enter = j
                    break
            if enter is None:
                return "optimal"
            best = None
            for i in range(M):
                if tab[i][enter] > 0:
                    ratio = tab[i][-1] / tab[i][enter]
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                        best = (ratio, i)
            if best is None:
                return "unbounded"
            pivot(best[1], enter)

    cost1 = [F(0)] * (n + n_slack) + [F(1)] * M
    run(cost1, set(range(width)))
    if sum(tab[i][-1] for i in range(M) if basis[i] in art) > 0:
        return "infeasible", None
    for i in range(M):
        if basis[i] in art:
            for j in range(n + n_slack):
                if tab[i][j] != 0:
                    pivot(i, j)
                    break
    cost2 = [F(v) for v in c] + [F(0)] * (n_slack + M)
    allowed = set(range(n + n_slack))
    status = run(cost2, allowed | {basis[i] for i in range(M)})
    if status == "unbounded":
        return status, None
    z = [F(0)] * width
    for i in range(M):
        z[basis[i]] = tab[i][-1]
    obj = sum(F(c[j]) * (F(lb[j]) + z[j]) for j in range(n))
    return "optimal", float(obj)


def random_lp(rng):
    m = int(rng.integers(1, 7))
    n = int(rng.integers(1, 8))
    dense = rng.integers(-5, 6, (m, n)).astype(float)
    dense[rng.random((m, n)) < 0.3] = 0.0
    sense = np.where(rng.random(m) < 0.3, "E", "L")
    x0 = rng.integers(-3, 4, n).astype(float)
    rhs = dense @ x0 + np.where(sense == "L", rng.integers(0, 4, m), 0)
    if rng.random() < 0.15:
        rhs = rhs + rng.integers(-6, 7, m)       # often infeasible
    lb = x0 - rng.integers(0, 5, n)
    ub = np.where(rng.random(n) < 0.2, np.inf, x0 + rng.integers(0, 5, n))
    c = rng.integers(-6, 7, n).astype(float)
    return LpProblem(dense, sense, rhs, lb, ub, c)


@pytest.mark.parametrize("block", range(4))
def test_random_lps_match_tableau_oracle(block):
    rng = np.random.default_rng(1000 + block)
    counts = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(60):
        lp = random_lp(rng)
        status, obj = tableau_simplex(lp.a.toarray(), lp.sense, lp.rhs, lp.lb, lp.ub, lp.c)
        sol = solve(lp)
        counts[status] += 1
        expected = {"optimal": LpStatus.OPTIMAL, "infeasible": LpStatus.INFEASIBLE,
                    "unbounded": LpStatus.UNBOUNDED}[status]
        assert sol.status is expected
        if status == "optimal":
            assert abs(sol.objective - obj) <= 1e-7 * (1 + abs(obj))
            assert lp.primal_residual(sol.x) <= 1e-9
    assert counts["optimal"] > 30


def test_infeasible_constructed():
    lp = LpProblem(np.array([[1.0, 1.0], [1.0, 1.0]]), ["L", "E"], [1.0, 3.0],
                   [0.0, 0.0], [10.0, 10.0], [1.0, 1.0])
    assert solve(lp).status is LpStatus.INFEASIBLE
    bounds = LpProblem(np.array([[1.0, 0.0]]), ["E"], [5.0], [0.0, 0.0], [2.0, 1.0], [0.0, 1.0])
    assert solve(bounds).status is LpStatus.INFEASIBLE


def test_unbounded_constructed():
    lp = LpProblem(np.array([[1.0, -1.0]]), ["L"], [1.0], [0.0, 0.0], [np.inf, np.inf],
                   [-1.0, 0.0])
    assert solve(lp).status is LpStatus.UNBOUNDED
    free = LpProblem(np.zeros((0, 1)), [], [], [-np.inf], [np.inf], [1.0])
    assert solve(free).status is LpStatus.UNBOUNDED


def test_duals_and_reduced_costs():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 30:
        lp = random_lp(rng)
        sol = solve(lp)
        if not sol.optimal:
            continue
        checked += 1
        a = lp.a.toarray()
        np.testing.assert_allclose(sol.reduced_costs, lp.c - a.T @ sol.y, atol=1e-9)
        slack = lp.rhs - a @ sol.x
        # <= rows: y <= 0 and complementary
        le = lp.sense == "L"
        assert np.all(sol.y[le] <= 1e-9)
        assert np.all(np.abs(sol.y[le] * slack[le]) <= 1e-7)
        interior = (sol.x > lp.lb + 1e-7) & (sol.x < lp.ub - 1e-7)
        assert np.all(np.abs(sol.reduced_costs[interior]) <= 1e-7)


def test_warm_start_reuses_basis():
    rng = np.random.default_rng(9)
    n = 30
    a = rng.uniform(-1, 1, (20, n))
    lp = LpProblem(a, ["L"] * 20, rng.uniform(1, 2, 20), np.zeros(n), np.ones(n),
                   rng.uniform(-1, 1, n))
    cold = solve(lp)
    warm = solve(lp, warm=cold.basis)
    assert cold.optimal and warm.optimal
    assert warm.objective == pytest.approx(cold.objective, abs=1e-9)
    assert warm.iterations <= 1
    # perturbed right-hand side: warm start still lands on the same optimum as a cold solve
    lp2 = LpProblem(a, ["L"] * 20, lp.rhs * 0.9, lp.lb, lp.ub, lp.c)
    assert solve(lp2, warm=cold.basis).objective == pytest.approx(solve(lp2).objective, abs=1e-9)


def test_iteration_limit():
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, (15, 25))
    lp = LpProblem(a, ["L"] * 15, np.ones(15), np.zeros(25), np.ones(25), -np.ones(25))
    assert solve(lp, SolveOptions(max_iter=1)).status is LpStatus.ITER_LIMIT


def test_problem_validation():
    with pytest.raises(ValueError):
        LpProblem(np.eye(2), ["L", "G"], [1, 1], [0, 0], [1, 1], [1, 1])
    with pytest.raises(ValueError):
        LpProblem(np.eye(2), ["L", "L"], [1, 1], [2, 0], [1, 1], [1, 1])


def test_write_lp(tmp_path):
    lp = LpProblem(np.array([[1.0, 2.0]]), ["L"], [4.0], [0.0, -np.inf], [1.0, np.inf],
                   [1.0, -1.0], col_names=["x", "y"], row_names=["r"])
    path = tmp_path / "p.lp"
    write_lp(lp, path)
    text = path.read_text()
    lines = text.splitlines()
    assert lines[1] == "Minimize" and "Subject To" in lines and lines[-1] == "End"
    assert " r: 1.0 x + 2.0 y <= 4.0" in lines and " y free" in lines
