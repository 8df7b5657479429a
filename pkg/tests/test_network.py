import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucround.case_model import Branch, CaseError
from ucround.network import assemble, branch_admittance

from conftest import random_case


def circuit_currents(br: Branch, vf: complex, vt: complex) -> tuple[complex, complex]:
    """Terminal currents from the circuit: ideal transformer on the from side
    feeding an internal node, then the series element with half the charging
    at each end."""
    t = br.tap * cmath.exp(1j * br.shift)
    v_int = vf / t
    ys = 1.0 / complex(br.r, br.x)
    i_int = ys * (v_int - vt) + 0.5j * br.b_charge * v_int
    # lossless transformer: vf * conj(i_f) == v_int * conj(i_int)
    i_f = i_int / t.conjugate()
    i_t = ys * (vt - v_int) + 0.5j * br.b_charge * vt
    return i_f, i_t


@pytest.mark.parametrize("br", [
    Branch(1, 2, 0.01, 0.1, 0.02),
    Branch(1, 2, 0.0, 0.037),
    Branch(1, 2, 0.02, 0.2, 0.1, tap=0.95),
    Branch(1, 2, 0.005, 0.08, 0.0, tap=1.05, shift=0.3),
])
def test_pi_model_matches_circuit(br):
    y = branch_admittance(br)
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.uniform(0.9, 1.1, 2) * np.exp(1j * rng.uniform(-0.5, 0.5, 2))
        i_f, i_t = circuit_currents(br, v[0], v[1])
        np.testing.assert_allclose(y @ v, [i_f, i_t], atol=1e-12)


def test_zero_impedance_rejected():
    with pytest.raises(CaseError):
        branch_admittance(Branch(1, 2, 0.0, 0.0))


def kcl_ybus(case) -> np.ndarray:
    """Dense Y assembled column by column from circuit currents (unit-voltage probes)."""
    idx = case.bus_index()
    nb = case.n_bus
    y = np.zeros((nb, nb), dtype=complex)
    for k in range(nb):
        v = np.zeros(nb, dtype=complex)
        v[k] = 1.0
        inj = np.array([complex(b.g_sh, b.b_sh) for b in case.buses]) * v
        for br in case.branches:
            f, t = idx[br.from_bus], idx[br.to_bus]
            i_f, i_t = circuit_currents(br, v[f], v[t])
            inj[f] += i_f
            inj[t] += i_t
        y[:, k] = inj
    return y


def test_identity_case6(case6, net6):
    assert net6.identity_residual() <= 1e-12
    np.testing.assert_allclose(net6.y_bus.toarray(), kcl_ybus(case6), atol=1e-12)
    # every column of A has one -1 (from) and one +1 (to)
    a = net6.a_incidence
    assert np.all(a.sum(axis=0) == 0) and np.all(np.abs(a).sum(axis=0) == 2)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n_bus=st.integers(2, 9))
def test_identity_random_networks(seed, n_bus):
    case = random_case(seed, n_bus=n_bus)
    net = assemble(case)
    assert net.identity_residual() <= 1e-12
    np.testing.assert_allclose(net.y_bus.toarray(), kcl_ybus(case), atol=1e-12)


def test_branch_currents_from_maps(case6, net6):
    rng = np.random.default_rng(5)
    v = rng.uniform(0.95, 1.05, case6.n_bus) * np.exp(1j * rng.uniform(-0.3, 0.3, case6.n_bus))
    idx = case6.bus_index()
    i_from = net6.y1 @ v
    i_to = net6.y2 @ v
    for l, br in enumerate(case6.branches):
        i_f, i_t = circuit_currents(br, v[idx[br.from_bus]], v[idx[br.to_bus]])
        assert abs(i_from[l] - i_f) < 1e-12 and abs(i_to[l] - i_t) < 1e-12
