import math

import numpy as np
import pytest

from optmeas import cloning, fidelity, qlin
from optmeas import prior as pr
from optmeas.errors import InvalidStateError

from conftest import random_bloch

OPT = cloning.OPTIMAL


class TestCloneState:
    @pytest.mark.parametrize("t", [0.0, 0.1, 1 / 3])
    def test_mixed_input(self, t):
        params = cloning.ClonerParams(0.5, t)
        w = np.linalg.eigvalsh(cloning.clone([0, 0, 0], params))
        assert np.allclose(np.sort(w), np.sort([(1 + t) / 4] * 3 + [(1 - 3 * t) / 4]))

    def test_pure_input(self):
        w = np.linalg.eigvalsh(cloning.clone([0, 0, 1]))
        assert np.allclose(np.sort(w), [0, 0, 1 / 3, 2 / 3], atol=1e-14)

    def test_hermitian_trace(self, rng):
        for _ in range(20):
            rho = cloning.clone(random_bloch(rng))
            assert qlin.is_hermitian(rho) and abs(np.trace(rho) - 1) < 1e-14

    def test_no_singlet_component(self, rng):
        for _ in range(100):
            rho = cloning.clone(random_bloch(rng))
            assert abs(qlin.SINGLET.conj() @ rho @ qlin.SINGLET) < 1e-12

    def test_triplet_probabilities(self, rng):
        for _ in range(100):
            b, n = random_bloch(rng), random_bloch(rng, inside=False)
            tt = np.kron(qlin.ket(n), qlin.ket(n))
            p = np.real(tt.conj() @ cloning.clone(b) @ tt)
            assert abs(p - (1 + b @ n) / 3) < 1e-12

    def test_marginals_shrink(self, rng):
        b = random_bloch(rng)
        rho = cloning.clone(b).reshape(2, 2, 2, 2)
        first = np.einsum("ijkj->ik", rho)
        assert np.allclose(qlin.bloch_from_density(first), (2 / 3) * b, atol=1e-14)

    def test_batch_matches(self, rng):
        bs = np.array([random_bloch(rng) for _ in range(5)])
        assert np.allclose(cloning.clone_batch(bs), [cloning.clone(b) for b in bs])

    def test_unphysical(self):
        with pytest.raises(InvalidStateError):
            cloning.clone([0, 0, 1], cloning.ClonerParams(0.9, 0.45))


class TestPhysicality:
    def test_optimal_is_physical(self):
        assert OPT.is_physical()

    def test_scan_boundary(self):
        rows = cloning.physicality_scan(np.linspace(0.1, 0.9, 17))
        for eta, t, worst, ok in rows:
            assert abs(t - eta / 2) < 1e-15
            assert ok == (eta <= 2 / 3 + 1e-12)
            assert (worst < 0) == (eta > 2 / 3 + 1e-12)


class TestCloneThenMeasure:
    def test_pure(self):
        assert abs(cloning.fbar_via_clone(pr.pure_prior()) - 2 / 3) < 1e-8

    def test_two_point(self):
        assert abs(cloning.fbar_via_clone(pr.two_point_prior()) - 0.5 * (1 + 1 / math.sqrt(10))) < 1e-8

    def test_uniform_ball(self):
        expected = fidelity.fbar_max_closed(pr.uniform_ball_prior(), 1).value_closed
        assert abs(cloning.fbar_via_clone(pr.uniform_ball_prior()) - expected) < 1e-8
        assert abs(expected - 0.811037) < 1e-6

    def test_random_priors(self, rng):
        for _ in range(20):
            p = pr.random_prior(rng)
            assert abs(cloning.fbar_via_clone(p) - fidelity.fbar_max_closed(p, 1).value_closed) < 1e-8

    def test_weaker_cloner_loses(self):
        p = pr.uniform_ball_prior()
        best = cloning.fbar_via_clone(p)
        for eta in (0.3, 0.5, 0.6):
            assert cloning.fbar_via_clone(p, cloning.ClonerParams(eta, eta / 2)) < best - 1e-4
