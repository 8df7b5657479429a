import numpy as np
import pytest

from ucround.case_model import case_from_dict, load_builtin
from ucround.network import assemble


@pytest.fixture(scope="session")
def case6():
    return load_builtin("case6")


@pytest.fixture(scope="session")
def net6(case6):
    return assemble(case6)


def random_case_doc(rng: np.random.Generator, n_bus: int = 5, horizon: int = 2,
                    n_units: int = 2, taps: bool = True, limits: bool = True) -> dict:
    """Connected random network (spanning tree plus chords), per-unit."""
    buses = [{"id": k + 1, "v_min": 0.9, "v_max": 1.1, "is_reference": k == 0,
              "g_sh": float(rng.uniform(0, 0.05)), "b_sh": float(rng.uniform(-0.1, 0.1))}
             for k in range(n_bus)]
    pairs = [(int(rng.integers(0, k)), k) for k in range(1, n_bus)]
    for _ in range(int(rng.integers(0, n_bus))):
        a, b = rng.choice(n_bus, 2, replace=False)
        pairs.append((int(a), int(b)))
    branches = []
    for a, b in pairs:
        br = {"from_bus": a + 1, "to_bus": b + 1, "r": float(rng.uniform(0.001, 0.05)),
              "x": float(rng.uniform(0.02, 0.3)), "b_charge": float(rng.uniform(0, 0.2))}
        if taps and rng.random() < 0.4:
            br["tap"] = float(rng.uniform(0.9, 1.1))
            br["shift"] = float(rng.uniform(-0.2, 0.2))
        if limits and rng.random() < 0.7:
            br["i_max"] = float(rng.uniform(0.5, 3.0))
        branches.append(br)
    units = []
    for g in range(n_units):
        units.append({"bus": int(rng.integers(1, n_bus + 1)), "a2": 0.01, "a1": 10.0, "a0": 50.0,
                      "c_up": 10.0, "c_down": 0.0, "p_min": 0.1, "p_max": 2.0,
                      "q_min": -1.0, "q_max": 1.0, "r_up": 1.0, "r_down": 1.0,
                      "s_up": 1.0, "s_down": 1.0, "t_up": 1, "t_down": 1,
                      "u0": 1, "p0": 0.5, "dwell0": 1})
    pd = {str(k + 1): [float(v) for v in rng.uniform(0, 0.5, horizon)] for k in range(n_bus)}
    qd = {k: [0.2 * v for v in s] for k, s in pd.items()}
    return {"base_mva": 100.0, "horizon": horizon, "per_unit": True, "angle_unit": "radians",
            "buses": buses, "branches": branches, "thermal_units": units,
            "condensers": [{"bus": n_bus, "q_min": -0.5, "q_max": 0.5}],
            "demand": {"p": pd, "q": qd}, "reserve": [0.0] * horizon}


def random_case(seed: int, **kw):
    return case_from_dict(random_case_doc(np.random.default_rng(seed), **kw))


@pytest.fixture(scope="session")
def rr_run(case6, net6):
    """Memoized 6-bus relax-and-round runs keyed by (rescale, round, penalty)."""
    from dataclasses import replace

    from ucround.drivers import relax_and_round
    from ucround.pslp import PslpParams

    cache = {}

    def run(rescale, rnd, penalty=5e6):
        key = (rescale, rnd, penalty)
        if key not in cache:
            base = PslpParams()
            cache[key] = relax_and_round(case6, rescale, rnd, replace(base, mu=penalty), base,
                                         net=net6)
        return cache[key]
    return run


@pytest.fixture(scope="session")
def fp_run(case6):
    from ucround.drivers import relax_and_pump
    return relax_and_pump(case6, "re-ruc", "uc-er")


def all_merit_sequences(report):
    """Accepted-merit sequences of every PSLP run logged in a report trace."""
    out = []
    for entry in report.trace:
        if "trace" in entry:
            rows = entry["trace"]
            seq = [rows[0]["merit"]] if rows else []
            seq += [r["merit"] for r in rows if r["accepted"]]
            out.append(seq)
        if "merits" in entry:
            out.append(list(entry["merits"]))
    return out


def is_monotone(seq) -> bool:
    return all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(seq, seq[1:]))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    return ok


def info(criterion: str, detail: str) -> None:
    """Report-only line for soft targets."""
    ACCEPTANCE_LINES.append(f"INFO  {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
