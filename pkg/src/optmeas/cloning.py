"""Universal symmetric 1 -> 2 cloner and the clone-then-measure equivalence.

The clone of ``rho(b)`` is

    (I(x)I + eta (b.sigma (x) I + I (x) b.sigma) + t sum_j sigma_j (x) sigma_j) / 4

Measuring the optimal clone with the two-copy POVM and the best guesses
reproduces the single-copy optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qlin
from .errors import InvalidStateError
from .fidelity import outcome_table
from .povm import build_povm
from .prior import RadialPrior

_CORRELATOR = sum(np.kron(s, s) for s in qlin.PAULIS)
_LOCAL = np.array([np.kron(s, qlin.PAULI_I) + np.kron(qlin.PAULI_I, s) for s in qlin.PAULIS])


@dataclass(frozen=True)
class ClonerParams:
    eta: float
    t: float

    def extreme_eigenvalues(self) -> np.ndarray:
        """Spectra of the clone at ``b = 0`` and ``|b| = 1``; eigenvalues are affine in ``|b|``."""
        return np.concatenate(
            [np.linalg.eigvalsh(_clone_matrix(np.zeros(3), self)),
             np.linalg.eigvalsh(_clone_matrix(np.array([0.0, 0.0, 1.0]), self))]
        )

    def is_physical(self, tol=1e-12) -> bool:
        ev = self.extreme_eigenvalues()
        return bool(ev.min() >= -tol and ev.max() <= 1 + tol)


OPTIMAL = ClonerParams(eta=2.0 / 3.0, t=1.0 / 3.0)


def _clone_matrix(b, params):
    return 0.25 * (
        np.eye(4) + params.eta * np.tensordot(b, _LOCAL, axes=1) + params.t * _CORRELATOR
    )


def clone(b, params: ClonerParams = OPTIMAL) -> np.ndarray:
    """Two-qubit output of the cloner for input Bloch vector ``b``."""
    b = qlin.as_bloch(b)
    if not params.is_physical():
        raise InvalidStateError(f"unphysical cloner parameters {params}")
    return _clone_matrix(b, params)


def clone_batch(bvecs, params: ClonerParams = OPTIMAL) -> np.ndarray:
    bvecs = np.asarray(bvecs, dtype=float)
    return 0.25 * (
        np.eye(4)[None]
        + params.eta * np.einsum("mk,kij->mij", bvecs, _LOCAL)
        + params.t * _CORRELATOR[None]
    )


def fbar_via_clone(prior: RadialPrior, params: ClonerParams = OPTIMAL, radial_nodes=None) -> float:
    """Mean fidelity of cloning one copy and measuring the pair optimally."""
    if not params.is_physical():
        raise InvalidStateError(f"unphysical cloner parameters {params}")
    povm = build_povm(2, prior)
    table = outcome_table(
        povm.operators(), prior, lambda bv: clone_batch(bv, params), radial_nodes, m_u=6, m_phi=8
    )
    return table.optimal_value()


def physicality_scan(etas):
    """Flag physicality along ``t = eta / 2``, the family containing the optimal cloner."""
    rows = []
    for eta in etas:
        p = ClonerParams(float(eta), float(eta) / 2)
        worst = (1 - 2 * p.eta + p.t) / 4
        rows.append((p.eta, p.t, worst, p.is_physical()))
    return rows
