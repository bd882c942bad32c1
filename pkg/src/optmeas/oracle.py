"""Brute-force checks that the closed-form guesses and POVM structure are optimal.

Everything here works from dense matrices and direct quadrature; the closed
forms only enter as the predictions being checked.  Global optimality over
all POVMs is not certified: the perturbation check gives local evidence only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import minimize

from . import qlin
from .errors import ConvergenceError
from .fidelity import fbar_max_closed, outcome_table, tensor_state_map
from .povm import Povm, build_povm, element_operator, guess_magnitude
from .prior import RadialPrior

MAX_GRID = 1e-3


@dataclass(frozen=True)
class ScanResult:
    grid: dict
    best_value: float
    best_param: float
    prediction: float
    gap: float
    values: np.ndarray = field(default=None, repr=False)

    def as_dict(self):
        d = asdict(self)
        d.pop("values")
        return d


def _orders(N):
    return N // 2 + 3, N + 4


def scan_guess_magnitude(prior: RadialPrior, N: int, twice_s: int, grid: float = 1e-3) -> ScanResult:
    """Scan the guess radius of one sector over ``[-1, 1]`` and locate the maximum.

    The sector contribution is evaluated by direct quadrature against the
    dense sector operators, with guesses ``r * n_i``.
    """
    if grid > MAX_GRID:
        raise ValueError(f"grid resolution {grid} is coarser than {MAX_GRID}")
    povm = build_povm(N, None)
    elems = [e for e in povm.elements if e.twice_s == twice_s]
    if not elems:
        raise ValueError(f"no sector twice_s={twice_s} for N={N}")
    m_u, m_phi = _orders(N)
    table = outcome_table([e.operator for e in elems], prior, tensor_state_map(N), m_u=m_u, m_phi=m_phi)
    steps = int(round(2.0 / grid))
    radii = np.linspace(-1.0, 1.0, steps + 1)
    values = np.zeros_like(radii)
    for k, e in enumerate(elems):
        n = np.array([0.0, 0.0, 1.0]) if e.direction is None else e.direction
        sigmas = qlin.densities_from_bloch(np.outer(radii, n))
        F = qlin.qubit_fidelity_grid(table.states, sigmas)
        values += (table.weights * table.probs[k]) @ F
    best = int(np.argmax(values))
    predicted = guess_magnitude(prior, N, twice_s)
    return ScanResult(
        grid={"start": -1.0, "stop": 1.0, "step": float(radii[1] - radii[0]), "points": steps + 1},
        best_value=float(values[best]),
        best_param=float(radii[best]),
        prediction=predicted,
        gap=abs(float(radii[best]) - predicted),
        values=values,
    )


@dataclass(frozen=True)
class FreeGuessResult:
    value: float
    guesses: np.ndarray
    closed: float
    seed: int

    @property
    def gap(self):
        return abs(self.value - self.closed)


def optimize_free_guesses(povm: Povm, prior: RadialPrior, seed: int = 0) -> FreeGuessResult:
    """Maximize mean fidelity over unconstrained guess Bloch vectors, one outcome at a time."""
    rng = np.random.default_rng(seed)
    m_u, m_phi = _orders(povm.N)
    table = outcome_table(povm.operators(), prior, tensor_state_map(povm.N), m_u=m_u, m_phi=m_phi)
    guesses = []
    total = 0.0
    for e in range(len(povm)):
        pw = table.weights * table.probs[e]

        def value(r):
            sigma = qlin.densities_from_bloch(r[None, :])
            return float(pw @ qlin.qubit_fidelity_grid(table.states, sigma)[:, 0])

        # r = w[:3] / |w| covers the closed ball smoothly, sqrt(1 - |r|^2) = |w[3]| / |w|;
        # the penalty pins |w| near 1 without moving the optimum in r
        def neg(w):
            n2 = w @ w
            return -value(w[:3] / np.sqrt(n2)) + (n2 - 1.0) ** 2

        start = rng.normal(size=4)
        start /= np.linalg.norm(start)
        res = minimize(neg, start, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
        if not np.all(np.isfinite(res.x)):
            raise ConvergenceError(f"guess optimization failed for outcome {e}: {res.message}")
        r = res.x[:3] / np.linalg.norm(res.x)
        guesses.append(r)
        total += value(r)
    closed = fbar_max_closed(prior, povm.N).value_closed
    return FreeGuessResult(float(total), np.array(guesses), closed, seed)


@dataclass(frozen=True)
class PerturbReport:
    trials: int
    accepted: int
    rejected: int
    improvements: int
    max_gain: float
    baseline: float
    step: float
    seed: int
    tolerance: float

    @property
    def passed(self):
        return self.improvements == 0

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _resolve_weights(dirs, w0, twice_s):
    A = np.vstack([np.ones(len(w0)), np.asarray(dirs).T])
    target = np.array([twice_s + 1.0, 0.0, 0.0, 0.0])
    return w0 + np.linalg.pinv(A) @ (target - A @ w0)


def _tangent_kick(n, step, rng):
    g = rng.normal(size=3)
    g -= (g @ n) * n
    norm = np.linalg.norm(g)
    if norm == 0 or step == 0:
        return n.copy()
    v = n + np.tan(step * rng.random()) * g / norm
    return v / np.linalg.norm(v)


def perturb_povm_check(povm: Povm, prior: RadialPrior, trials: int = 100, step: float = 1e-2,
                       seed: int = 0, tol: float = 1e-9) -> PerturbReport:
    """Randomly tilt the measurement directions and confirm mean fidelity never rises.

    Each trial rotates every direction by an angle up to ``step``, re-solves
    the sector weights for the weight-sum and centroid constraints (least
    change), rebuilds the operators, and restores ``sum O = I`` by
    conjugating with ``S^{-1/2}``, ``S = sum O``.  Both the baseline and the
    perturbed POVM are scored with their own best guesses.
    """
    if step > 1e-2:
        raise ValueError(f"step {step} larger than 1e-2")
    rng = np.random.default_rng(seed)
    N = povm.N
    m_u, m_phi = _orders(N)
    state_map = tensor_state_map(N)
    baseline = outcome_table(povm.operators(), prior, state_map, m_u=m_u, m_phi=m_phi).optimal_value()
    by_sector = {}
    for e in povm.elements:
        by_sector.setdefault(e.twice_s, []).append(e)
    accepted = rejected = improved = 0
    max_gain = -np.inf
    for _ in range(trials):
        ops = []
        ok = True
        for twice_s, elems in by_sector.items():
            if twice_s == 0:
                ops.extend(e.operator for e in elems)
                continue
            dirs = np.array([_tangent_kick(e.direction, step, rng) for e in elems])
            w = _resolve_weights(dirs, np.array([e.weight for e in elems]), twice_s)
            if np.any(w <= 0):
                ok = False
                break
            ops.extend(element_operator(N, twice_s, n, c) for n, c in zip(dirs, w))
        if not ok:
            rejected += 1
            continue
        S = np.sum(ops, axis=0)
        if np.linalg.eigvalsh(S).min() < 1e-6:
            rejected += 1
            continue
        Sinv = np.linalg.inv(sqrtm(S))
        ops = [Sinv @ O @ Sinv.conj().T for O in ops]
        value = outcome_table(ops, prior, state_map, m_u=m_u, m_phi=m_phi).optimal_value()
        accepted += 1
        gain = value - baseline
        max_gain = max(max_gain, gain)
        if gain > tol:
            improved += 1
    return PerturbReport(trials, accepted, rejected, improved,
                         float(max_gain) if accepted else 0.0, baseline, step, seed, tol)


def vonneumann_exhaustive_n1(prior: RadialPrior, n_theta: int = 7, n_phi: int = 8) -> ScanResult:
    """Score every projective single-copy measurement axis on a grid of the hemisphere."""
    thetas = np.linspace(0.0, np.pi / 2, n_theta)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    values = []
    for th in thetas:
        for ph in (phis if th > 0 else phis[:1]):
            n = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            up, down = qlin.ket(n), qlin.ket(-n)
            ops = [np.outer(up, up.conj()), np.outer(down, down.conj())]
            table = outcome_table(ops, prior, tensor_state_map(1), m_u=4, m_phi=6)
            values.append(table.optimal_value())
    values = np.array(values)
    closed = fbar_max_closed(prior, 1).value_closed
    best = int(np.argmax(values))
    return ScanResult(
        grid={"n_theta": n_theta, "n_phi": n_phi, "axes": int(values.size),
              "spread": float(values.max() - values.min())},
        best_value=float(values[best]),
        best_param=float(best),
        prediction=closed,
        gap=float(np.max(np.abs(values - closed))),
        values=values,
    )
