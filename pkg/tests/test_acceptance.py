"""Acceptance criteria, one test each, with a printed PASS/FAIL line per criterion.

Run directly (``python tests/test_acceptance.py``) for just the summary lines.
"""

import itertools
import math

import numpy as np
import pytest

from optmeas import cloning, design, fidelity, oracle, qlin
from optmeas import prior as pr
from optmeas.povm import build_povm, guess_magnitude, outcome_probability, outcome_probability_direct, sectors

RESULTS = {}

NAMED = {
    "pure": pr.pure_prior,
    "random": pr.random_state_prior,
    "uniform-ball": pr.uniform_ball_prior,
    "two-point": pr.two_point_prior,
}


def closed(p, N):
    return fidelity.fbar_max_closed(p, N).value_closed


def random_priors(seed, count):
    rng = np.random.default_rng(seed)
    return [pr.random_prior(rng) for _ in range(count)]


def ac01():
    err = max(abs(closed(pr.pure_prior(), N) - (N + 1) / (N + 2)) for N in range(1, 6))
    return err < 1e-12, f"max error {err:.2e}"


def ac02():
    err, rmax = 0.0, 0.0
    for N in range(1, 6):
        rep = fidelity.fbar_max_closed(pr.random_state_prior(), N)
        err = max(err, abs(rep.value_closed - 1))
        rmax = max([rmax] + [abs(t.r) for t in rep.per_sector])
    return err < 1e-12 and rmax == 0, f"max error {err:.2e}, max |r| {rmax:g}"


def ac03():
    err = abs(closed(pr.two_point_prior(), 1) - 0.5 * (1 + 1 / math.sqrt(10)))
    return err < 1e-12, f"error {err:.2e}"


def ac04():
    res = [build_povm(N).identity_residual() for N in range(1, 6)]
    return max(res) < 1e-9, "residuals " + ", ".join(f"{r:.1e}" for r in res)


def ac05():
    counts = [len(build_povm(N)) for N in range(1, 6)]
    return counts == [2, 5, 8, 15, 20], f"counts {counts}"


def ac06():
    ranks = [qlin.numerical_rank(e.operator, 1e-8) for e in build_povm(4).elements]
    tally = {r: ranks.count(r) for r in sorted(set(ranks))}
    return tally == {1: 10, 2: 1, 3: 4}, f"rank tally {tally}"


def ac07():
    worst = 0.0
    for name, make in NAMED.items():
        p = make()
        for N in range(1, 5):
            worst = max(worst, abs(closed(p, N) - fidelity.fbar_direct(build_povm(N, p), p)))
    return worst < 1e-8, f"max |closed - direct| {worst:.2e}"


def ac08():
    worst = 0.0
    for p in random_priors(8, 50):
        for N in range(1, 5):
            worst = max(worst, abs(fidelity.fbar_specialized(p, N) - closed(p, N)))
    return worst < 1e-12, f"max difference {worst:.2e}"


def ac09():
    rng = np.random.default_rng(9)
    povms = {N: build_povm(N) for N in range(1, 6)}
    worst = 0.0
    for _ in range(100):
        P = povms[int(rng.integers(1, 6))]
        e = P.elements[int(rng.integers(len(P)))]
        b = rng.normal(size=3)
        b *= rng.random() ** (1 / 3) / np.linalg.norm(b)
        worst = max(worst, abs(outcome_probability(e, b) - outcome_probability_direct(e, b)))
    return worst < 1e-10, f"max difference {worst:.2e}"


def ac10():
    priors = random_priors(10, 10)
    worst_scan = 0.0
    for p in priors:
        for N in range(1, 5):
            for sec in sectors(N):
                scan = oracle.scan_guess_magnitude(p, N, sec.twice_s, grid=1e-3)
                worst_scan = max(worst_scan, scan.gap)
    worst_free = 0.0
    for k, p in enumerate(priors[:3]):
        for N in range(1, 5):
            worst_free = max(worst_free, oracle.optimize_free_guesses(build_povm(N, p), p, seed=k).gap)
    ok = worst_scan <= 1e-3 + 1e-12 and worst_free < 1e-6
    return ok, f"max argmax gap {worst_scan:.2e} (step 1e-3), free-guess gap {worst_free:.2e}"


def ac11():
    worst = np.inf
    for p in random_priors(11, 50):
        vals = [closed(p, N) for N in range(1, 6)]
        worst = min(worst, min(b - a for a, b in zip(vals, vals[1:])))
    return worst >= -1e-12, f"smallest step {worst:.2e}"


def ac12():
    sums = [fidelity.sector_count_check(N) for N in range(1, 11)]
    return sums == [2**N for N in range(1, 11)], "exact for N=1..10" if sums == [2**N for N in range(1, 11)] else str(sums)


def ac13():
    worst = 0.0
    for p in random_priors(13, 20):
        worst = max(worst, abs(cloning.fbar_via_clone(p) - closed(p, 1)))
    rng = np.random.default_rng(13)
    singlet = 0.0
    for _ in range(50):
        b = rng.normal(size=3)
        b *= rng.random() / np.linalg.norm(b)
        singlet = max(singlet, abs(qlin.SINGLET.conj() @ cloning.clone(b) @ qlin.SINGLET))
    return worst < 1e-8 and singlet < 1e-12, f"fidelity gap {worst:.2e}, singlet weight {singlet:.2e}"


def ac14():
    rng = np.random.default_rng(14)
    comm = 0.0
    for N in range(1, 6):
        b = rng.normal(size=3)
        b *= rng.random() / np.linalg.norm(b)
        R = qlin.tensor_power(qlin.density_from_bloch(b), N)
        for i, j in itertools.combinations(range(N), 2):
            comm = max(comm, qlin.max_abs(qlin.commutator(qlin.transposition(i, j, N), R)))
        for m in range(1, N + 1):
            comm = max(comm, qlin.max_abs(qlin.commutator(qlin.total_spin_squared(N, range(m)), R)))
    p = pr.uniform_ball_prior()
    shift = 0.0
    for N in range(1, 6):
        Rot = qlin.random_rotation(rng)
        sets = {t: design.direction_set(t).rotated(Rot) for t in range(1, N + 1)}
        base = fidelity.fbar_direct(build_povm(N, p), p)
        shift = max(shift, abs(fidelity.fbar_direct(build_povm(N, p, direction_sets=sets), p) - base))
    return comm < 1e-12 and shift < 1e-9, f"max commutator {comm:.2e}, rotation shift {shift:.2e}"


CRITERIA = [
    ("AC-01", "pure-state limit", ac01),
    ("AC-02", "random-state limit", ac02),
    ("AC-03", "two-point prior", ac03),
    ("AC-04", "identity resolution", ac04),
    ("AC-05", "minimal outcome counts", ac05),
    ("AC-06", "four-copy operator ranks", ac06),
    ("AC-07", "closed form vs direct quadrature", ac07),
    ("AC-08", "specialized formulas agree", ac08),
    ("AC-09", "probability formula vs trace", ac09),
    ("AC-10", "guess optimality", ac10),
    ("AC-11", "monotone in copies", ac11),
    ("AC-12", "dimension sum rule", ac12),
    ("AC-13", "clone then measure", ac13),
    ("AC-14", "permutation, spin and rotation invariance", ac14),
]


def line(tag, title, passed, detail):
    return f"{tag} {'PASS' if passed else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("tag,title,check", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(tag, title, check):
    passed, detail = check()
    RESULTS[tag] = line(tag, title, passed, detail)
    print(RESULTS[tag])
    assert passed, RESULTS[tag]


if __name__ == "__main__":
    for tag, title, check in CRITERIA:
        print(line(tag, title, *check()), flush=True)
