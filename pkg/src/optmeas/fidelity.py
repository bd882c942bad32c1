"""Maximal mean fidelity: general closed form, per-N closed forms, and direct quadrature.

The direct route never uses the closed-form probabilities.  It builds
``rho(b)^{(x) N}`` as a dense matrix at each node of a product quadrature
(radial rule of the prior x Gauss-Legendre in ``cos(theta)`` x trapezoid in
``phi``, all in one global frame), takes traces against the POVM operators,
and evaluates qubit fidelities from matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np

from . import qlin
from .errors import QuadratureError
from .povm import Povm, build_povm, sectors
from .prior import RadialPrior, default_nodes, g_integrals, moment_I

DIRECT_TOL = 1e-8
CHUNK = 512


@dataclass(frozen=True)
class SectorTerm:
    twice_s: int
    term: float
    r: float
    g1: float
    g2: float


@dataclass(frozen=True)
class FidelityReport:
    N: int
    prior_id: str
    value_closed: float
    value_direct: float | None = None
    per_sector: tuple = field(default=())

    @property
    def abs_diff(self) -> float | None:
        if self.value_direct is None:
            return None
        return abs(self.value_closed - self.value_direct)


def fbar_max_closed(prior: RadialPrior, N: int, nodes=None) -> FidelityReport:
    """``1/2 + sum_s (2s+1)^2 / (N/2+s+1) * C(N, N/2+s) * sqrt(g1^2 + g2^2)``."""
    if int(N) != N or N < 1:
        raise ValueError(f"copy count must be a positive integer, got {N!r}")
    total = 0.5
    terms = []
    for twice_s in range(N % 2, N + 1, 2):
        g1, g2 = g_integrals(prior, N, twice_s, nodes)
        norm = float(np.hypot(g1, g2))
        coef = (twice_s + 1) ** 2 / ((N + twice_s) / 2 + 1) * comb(N, (N + twice_s) // 2)
        term = coef * norm
        total += term
        r = 0.0 if norm == 0.0 else g2 / norm
        terms.append(SectorTerm(twice_s, term, r, g1, g2))
    return FidelityReport(N, prior.name, float(total), None, tuple(terms))


def fbar_specialized(prior: RadialPrior, N: int, nodes=None) -> float:
    """Hand-reduced closed forms for one to four copies, written in the moments ``I_alpha``."""

    def I(twice_alpha):
        return moment_I(prior, twice_alpha, nodes)

    if N == 1:
        return 0.5 * (1 + sqrt(36 * I(1) ** 2 + (1 - 4 * I(2)) ** 2) / 3)
    if N == 2:
        return 0.5 + I(3) + 0.25 * sqrt(16 * (I(1) - I(3)) ** 2 + (1 - 4 * I(2)) ** 2)
    if N == 3:
        return (
            0.5
            + sqrt(36 * I(3) ** 2 + (I(2) - 4 * I(4)) ** 2) / 3
            + sqrt(100 * (I(1) - 2 * I(3)) ** 2 + (3 - 14 * I(2) + 8 * I(4)) ** 2) / 10
        )
    if N == 4:
        return (
            0.5
            + 2 * I(5)
            + sqrt((2 - 11 * I(2) + 12 * I(4)) ** 2 + 36 * (I(1) - 3 * I(3) + I(5)) ** 2) / 6
            + 0.75 * sqrt((I(2) - 4 * I(4)) ** 2 + 16 * (I(3) - I(5)) ** 2)
        )
    raise ValueError(f"no specialized formula for N={N}; supported N are 1, 2, 3, 4")


# -- direct quadrature ----------------------------------------------------------


def sphere_rule(m_u: int, m_phi: int):
    """Unit vectors and weights (summing to one) averaging over the sphere."""
    u, wu = np.polynomial.legendre.leggauss(m_u)
    phi = 2 * np.pi * np.arange(m_phi) / m_phi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    st = np.sqrt(1 - uu**2)
    dirs = np.stack([st * np.cos(pp), st * np.sin(pp), uu], axis=-1).reshape(-1, 3)
    w = np.repeat(wu / 2, m_phi) / m_phi
    return dirs, w


def quadrature_points(prior: RadialPrior, radial_nodes=None, m_u=8, m_phi=12):
    """Bloch vectors and weights for integrating against the prior over the whole ball."""
    radii, rw = prior.radial_rule(radial_nodes)
    keep = rw != 0
    radii, rw = radii[keep], rw[keep]
    dirs, aw = sphere_rule(m_u, m_phi)
    bvecs = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    weights = (rw[:, None] * aw[None, :]).reshape(-1)
    return bvecs, weights


def tensor_state_map(N):
    def state_map(bvecs):
        return qlin.batched_tensor_power(qlin.densities_from_bloch(bvecs), N)

    return state_map


@dataclass(frozen=True)
class OutcomeTable:
    """Probabilities of each outcome at every quadrature node."""

    bloch: np.ndarray
    weights: np.ndarray
    states: np.ndarray
    probs: np.ndarray

    def fidelities(self, guess) -> np.ndarray:
        """Fidelity of every node's single-copy state with one guess Bloch vector."""
        sigma = qlin.density_from_bloch(guess)
        return qlin.qubit_fidelity_batch(self.states, sigma)

    def element_value(self, e, guess) -> float:
        return float(np.sum(self.weights * self.probs[e] * self.fidelities(guess)))

    def mean_fidelity(self, guesses) -> float:
        return float(sum(self.element_value(e, g) for e, g in enumerate(guesses)))

    def guess_coefficients(self, e):
        """``(A, B, C)`` with element value ``A + B.r + C sqrt(1 - |r|^2)`` for guess ``r``."""
        pw = self.weights * self.probs[e]
        radial = np.sqrt(np.clip(1.0 - np.sum(self.bloch**2, axis=1), 0.0, None))
        return 0.5 * float(np.sum(pw)), 0.5 * (pw @ self.bloch), 0.5 * float(pw @ radial)

    def optimal_guess(self, e) -> np.ndarray:
        _, B, C = self.guess_coefficients(e)
        norm = float(np.sqrt(B @ B + C * C))
        return np.zeros(3) if norm == 0.0 else B / norm

    def optimal_value(self) -> float:
        """Mean fidelity when every outcome is answered with its best guess."""
        return float(sum(self.element_value(e, self.optimal_guess(e)) for e in range(self.probs.shape[0])))

    def total_probability(self) -> float:
        return float(np.sum(self.probs @ self.weights))


def outcome_table(operators, prior, state_map, radial_nodes=None, m_u=8, m_phi=12) -> OutcomeTable:
    ops = np.asarray(operators)
    bvecs, weights = quadrature_points(prior, radial_nodes, m_u, m_phi)
    probs = np.empty((ops.shape[0], bvecs.shape[0]))
    opsT = np.ascontiguousarray(np.transpose(ops, (0, 2, 1)))
    for start in range(0, bvecs.shape[0], CHUNK):
        R = state_map(bvecs[start:start + CHUNK])
        probs[:, start:start + CHUNK] = np.real(np.einsum("eij,qij->eq", opsT, R))
    states = qlin.densities_from_bloch(bvecs)
    return OutcomeTable(bvecs, weights, states, probs)


def _base_orders(N, prior, radial_nodes):
    n_r = default_nodes() if radial_nodes is None else radial_nodes
    return n_r, N // 2 + 3, N + 4


def _converged(evaluate, N, prior, radial_nodes, tol, max_doublings):
    n_r, m_u, m_phi = _base_orders(N, prior, radial_nodes)
    prev = evaluate(n_r, m_u, m_phi)
    for _ in range(max_doublings):
        n_r, m_u, m_phi = 2 * n_r, 2 * m_u, 2 * m_phi
        cur = evaluate(n_r, m_u, m_phi)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"direct quadrature did not converge to {tol:g} (last change {abs(cur - prev):.3e})",
        best_residual=abs(cur - prev),
    )


def fbar_with_guesses(povm: Povm, prior: RadialPrior, guesses, radial_nodes=None,
                      tol=DIRECT_TOL, max_doublings=2) -> float:
    """Mean fidelity of ``povm`` when outcome ``e`` is answered with Bloch vector ``guesses[e]``."""
    guesses = [qlin.as_bloch(g) for g in guesses]
    if len(guesses) != len(povm):
        raise ValueError(f"expected {len(povm)} guesses, got {len(guesses)}")
    ops = povm.operators()
    state_map = tensor_state_map(povm.N)

    def evaluate(n_r, m_u, m_phi):
        table = outcome_table(ops, prior, state_map, n_r, m_u, m_phi)
        return table.mean_fidelity(guesses)

    return _converged(evaluate, povm.N, prior, radial_nodes, tol, max_doublings)


def fbar_direct(povm: Povm, prior: RadialPrior, radial_nodes=None, tol=DIRECT_TOL) -> float:
    """Mean fidelity of ``povm`` with its own guesses, by direct matrix quadrature."""
    return fbar_with_guesses(povm, prior, povm.guesses(), radial_nodes, tol)


def report(prior: RadialPrior, N: int, direct=True, povm=None) -> FidelityReport:
    """Closed-form report, optionally with the direct value filled in."""
    closed = fbar_max_closed(prior, N)
    if not direct:
        return closed
    povm = povm if povm is not None else build_povm(N, prior)
    value = fbar_direct(povm, prior)
    return FidelityReport(N, prior.name, closed.value_closed, value, closed.per_sector)


def sector_count_check(N):
    """``sum_s (2s+1) d_N(s)`` in integer arithmetic."""
    return sum((sec.twice_s + 1) * sec.d for sec in sectors(N))


def scan_two_point(masses, b_high=1.0, N=1):
    """Closed-form fidelity over two-point priors ``m @ 0, (1-m) @ b_high``."""
    out = []
    for m in masses:
        p = RadialPrior(points=((0.0, float(m)), (b_high, 1.0 - float(m))), name=f"two-point:{m:g}")
        out.append((float(m), fbar_max_closed(p, N).value_closed))
    return out
