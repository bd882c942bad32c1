"""Invariant suite behind ``optmeas verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import design, qlin
from .errors import OptmeasError
from .fidelity import fbar_direct, fbar_max_closed, fbar_specialized, sector_count_check
from .oracle import optimize_free_guesses, scan_guess_magnitude
from .povm import build_povm, minimal_count, outcome_probability, outcome_probability_direct, sectors

DEFAULT_TOLS = {
    "design": 1e-8,
    "identity": 1e-9,
    "trace": 1e-10,
    "direct": 1e-8,
    "specialized": 1e-12,
    "commutator": 1e-12,
    "free_guess": 1e-6,
}
FLAT_SCAN = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return dict(self.__dict__)


def _check(name, residual, tol, detail=""):
    return CheckResult(name, float(residual), float(tol), bool(residual < tol), detail)


def run_checks(N, prior, seed=0, tols=None, direction_sets=None, samples=20):
    """Run every invariant for ``N`` copies under ``prior``; returns a list of results."""
    tol = dict(DEFAULT_TOLS)
    tol.update(tols or {})
    rng = np.random.default_rng(seed)
    results = []

    sets = {}
    for sec in sectors(N):
        if sec.twice_s == 0:
            continue
        ds = (direction_sets or {}).get(sec.twice_s)
        if ds is None:
            try:
                ds = design.direction_set(sec.twice_s)
            except OptmeasError as exc:
                results.append(CheckResult(f"design[2s={sec.twice_s}]", np.inf, tol["design"], False, str(exc)))
                return results
        sets[sec.twice_s] = ds
        rep = design.verify_direction_set(ds, tol["design"])
        resid = max(rep.design_residual, rep.weight_sum_error, rep.centroid_error)
        expected = design.PURE_STATE_COUNTS.get(sec.twice_s)
        detail = f"count={rep.count} expected={expected} rank={rep.rank}"
        ok = rep.passed and rep.count == expected
        results.append(CheckResult(f"design[2s={sec.twice_s}]", resid, tol["design"], ok, detail))

    results.append(_check("dimension_sum", abs(sector_count_check(N) - 2**N), 0.5,
                          f"sum (2s+1) d = {sector_count_check(N)}"))

    povm = build_povm(N, prior, direction_sets=sets, check=False)
    results.append(_check("identity_resolution", povm.identity_residual(), tol["identity"]))
    results.append(CheckResult("outcome_count", float(abs(len(povm) - minimal_count(N))), 0.5,
                               len(povm) == minimal_count(N), f"{len(povm)} elements"))
    bad_rank = [e.index for e in povm.elements if qlin.numerical_rank(e.operator) != e.sector.d]
    results.append(CheckResult("element_ranks", float(len(bad_rank)), 0.5, not bad_rank,
                               "ranks equal d_N(s)" if not bad_rank else f"mismatch at {bad_rank}"))

    worst = 0.0
    for _ in range(samples):
        e = povm.elements[int(rng.integers(len(povm)))]
        b = rng.normal(size=3)
        b *= rng.random() ** (1 / 3) / np.linalg.norm(b)
        worst = max(worst, abs(outcome_probability(e, b) - outcome_probability_direct(e, b)))
    results.append(_check("trace_formula", worst, tol["trace"], f"{samples} samples"))

    b = rng.normal(size=3)
    b *= rng.random() / np.linalg.norm(b)
    R = qlin.tensor_power(qlin.density_from_bloch(b), N)
    comm = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            comm = max(comm, qlin.max_abs(qlin.commutator(qlin.transposition(i, j, N), R)))
    for m in range(1, N + 1):
        comm = max(comm, qlin.max_abs(qlin.commutator(qlin.total_spin_squared(N, range(m)), R)))
    results.append(_check("permutation_spin_invariance", comm, tol["commutator"]))

    closed = fbar_max_closed(prior, N).value_closed
    try:
        direct = fbar_direct(povm, prior)
        results.append(_check("closed_vs_direct", abs(closed - direct), tol["direct"],
                              f"closed={closed:.12f} direct={direct:.12f}"))
    except OptmeasError as exc:
        results.append(CheckResult("closed_vs_direct", np.inf, tol["direct"], False, str(exc)))
    if N <= 4:
        results.append(_check("specialized_formula", abs(fbar_specialized(prior, N) - closed),
                              tol["specialized"]))

    worst_gap, flat = 0.0, []
    for sec in sectors(N):
        scan = scan_guess_magnitude(prior, N, sec.twice_s)
        if np.ptp(scan.values) < FLAT_SCAN:
            # the sector never fires under this prior, so every guess scores the same
            flat.append(sec.twice_s)
            continue
        worst_gap = max(worst_gap, scan.gap - scan.grid["step"])
    detail = "argmax within one grid step of closed-form r"
    if flat:
        detail += f"; flat sectors 2s={flat}"
    results.append(CheckResult("guess_scan", worst_gap, 0.0, worst_gap <= 1e-12, detail))
    free = optimize_free_guesses(povm, prior, seed)
    results.append(_check("free_guess_optimum", free.gap, tol["free_guess"]))
    return results
