"""Incidence and admittance matrices of a grid.

The bus admittance matrix is built twice: by stamping each branch's pi-model
block directly, and from the from/to decomposition
``Y = C1' Y1 + C2' Y2 + diag(Ysh)``. :func:`assemble` checks that the two
agree, so any indexing slip in either path shows up immediately.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .case_model import Branch, CaseError, PowerCase

IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class NetworkMatrices:
    a_incidence: np.ndarray      # (nb, nl) in {-1, 0, 1}
    c1: sp.csr_matrix            # (nl, nb) from-side selector
    c2: sp.csr_matrix            # (nl, nb) to-side selector
    y_branch: np.ndarray         # (nl, 2, 2) element admittance blocks
    y_bus: sp.csr_matrix         # (nb, nb), stamped
    y1: sp.csr_matrix            # (nl, nb) from-end current map
    y2: sp.csr_matrix            # (nl, nb) to-end current map
    y_shunt: np.ndarray          # (nb,)
    from_idx: np.ndarray
    to_idx: np.ndarray

    @property
    def n_bus(self) -> int:
        return self.a_incidence.shape[0]

    @property
    def n_branch(self) -> int:
        return self.a_incidence.shape[1]

    def y_from_identity(self) -> sp.csr_matrix:
        """``C1' Y1 + C2' Y2 + diag(Ysh)``."""
        return (self.c1.T @ self.y1 + self.c2.T @ self.y2
                + sp.diags(self.y_shunt)).tocsr()

    def identity_residual(self) -> float:
        """Max-abs entry of ``Y - (C1' Y1 + C2' Y2 + diag(Ysh))``."""
        diff = (self.y_bus - self.y_from_identity()).tocoo()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def branch_admittance(branch: Branch) -> np.ndarray:
    """Pi-model element admittance ``[[Yff, Yft], [Ytf, Ytt]]``.

    Series admittance ``1/(r + jx)``, half the charging susceptance on each
    end, and the complex tap ``tap * exp(j*shift)`` on the from side.
    """
    z = complex(branch.r, branch.x)
    if z == 0:
        raise CaseError("branch with zero impedance")
    ys = 1.0 / z
    half = 0.5j * branch.b_charge
    t = branch.tap * cmath.exp(1j * branch.shift)
    ytt = ys + half
    yff = ytt / (branch.tap * branch.tap)
    yft = -ys / t.conjugate()
    ytf = -ys / t
    return np.array([[yff, yft], [ytf, ytt]], dtype=complex)


def incidence(case: PowerCase) -> np.ndarray:
    idx = case.bus_index()
    a = np.zeros((case.n_bus, case.n_branch), dtype=int)
    for l, br in enumerate(case.branches):
        a[idx[br.from_bus], l] = -1
        a[idx[br.to_bus], l] = 1
    return a


def assemble(case: PowerCase) -> NetworkMatrices:
    """Build all network matrices of ``case`` and self-check the Y identity."""
    nb, nl = case.n_bus, case.n_branch
    idx = case.bus_index()
    a = incidence(case)
    c1 = sp.csr_matrix(np.maximum(0, -a.T).astype(float))
    c2 = sp.csr_matrix(np.maximum(0, a.T).astype(float))

    blocks = np.zeros((nl, 2, 2), dtype=complex)
    for l, br in enumerate(case.branches):
        blocks[l] = branch_admittance(br)
    f = np.array([idx[br.from_bus] for br in case.branches], dtype=int)
    t = np.array([idx[br.to_bus] for br in case.branches], dtype=int)

    ysh = np.array([complex(b.g_sh, b.b_sh) for b in case.buses])

    # path 1: direct stamping
    ybus = np.zeros((nb, nb), dtype=complex)
    for l in range(nl):
        i, k = f[l], t[l]
        ybus[i, i] += blocks[l, 0, 0]
        ybus[i, k] += blocks[l, 0, 1]
        ybus[k, i] += blocks[l, 1, 0]
        ybus[k, k] += blocks[l, 1, 1]
    ybus[np.diag_indices(nb)] += ysh

    # path 2: from/to decomposition
    y1 = (sp.diags(blocks[:, 0, 0]) @ c1 + sp.diags(blocks[:, 0, 1]) @ c2).tocsr()
    y2 = (sp.diags(blocks[:, 1, 0]) @ c1 + sp.diags(blocks[:, 1, 1]) @ c2).tocsr()

    net = NetworkMatrices(
        a_incidence=a, c1=c1, c2=c2, y_branch=blocks,
        y_bus=sp.csr_matrix(ybus), y1=y1, y2=y2, y_shunt=ysh,
        from_idx=f, to_idx=t,
    )
    scale = max(1.0, float(np.max(np.abs(ybus)))) if nb else 1.0
    err = net.identity_residual()
    if err > IDENTITY_TOL * scale:
        raise AssertionError(f"admittance identity violated: {err:.3e}")
    return net
