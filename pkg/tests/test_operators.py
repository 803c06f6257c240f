import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_stable_system
from core.errors import CapacityError, InputError
from core.linalg import psd_factor, restrict_to_symmetric, unvech, vech
from core.operators import (
    apply_operator,
    hautus_detectability,
    hautus_observability,
    matricize,
    mean_square_stability,
    noise_term,
    stabilizability_probe,
    symmetric_matricization,
)
from core.system import StochasticSystem, scalar_system


def _random_symmetric(n: int, seed: int) -> np.ndarray:
    G = np.random.default_rng(seed).standard_normal((n, n))
    return G + G.T


class TestApplyOperator:
    def test_scalar_value(self):
        sys = scalar_system(-1.0, n1=1.0, k=1.0)
        assert_allclose(apply_operator(sys, np.array([[1.0]])), [[-1.0]])

    def test_zero_input(self):
        sys = random_stable_system(4)
        assert_allclose(apply_operator(sys, np.zeros((4, 4))), np.zeros((4, 4)))

    def test_without_noise_is_lyapunov_operator(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((4, 4))
        sys = StochasticSystem(A=A, N=[np.zeros((4, 4))], B=np.zeros((4, 0)), C=np.zeros((0, 4)), K=[[1.0]])
        for seed in range(3):
            X = _random_symmetric(4, seed)
            assert_allclose(apply_operator(sys, X), A.T @ X + X @ A, atol=1e-12)
            assert_allclose(apply_operator(sys, X, adjoint=True), A @ X + X @ A.T, atol=1e-12)

    def test_result_is_symmetric(self):
        sys = random_stable_system(5, seed=1)
        Y = apply_operator(sys, _random_symmetric(5, 2))
        assert np.array_equal(Y, Y.T)

    def test_correlated_noise(self):
        rng = np.random.default_rng(4)
        N = [rng.standard_normal((3, 3)) for _ in range(2)]
        K = np.array([[1.0, 0.4], [0.4, 2.0]])
        sys = StochasticSystem(A=-np.eye(3), N=N, B=np.zeros((3, 0)), C=np.zeros((0, 3)), K=K)
        X = _random_symmetric(3, 5)
        expected = -2 * X + sum(K[i, j] * N[i].T @ X @ N[j] for i in range(2) for j in range(2))
        assert_allclose(apply_operator(sys, X), 0.5 * (expected + expected.T), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            apply_operator(random_stable_system(3), np.eye(2))


class TestNoisePositivity:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("adjoint", [False, True])
    def test_maps_psd_to_psd(self, seed, adjoint):
        rng = np.random.default_rng(seed)
        n = 5
        N = [rng.standard_normal((n, n)) / np.sqrt(n) for _ in range(2)]
        L = rng.standard_normal((2, 2))
        K = L @ L.T
        G = rng.standard_normal((n, 2))
        X = G @ G.T  # rank 2: Π_N(X) has rank ≤ 4 and a zero eigenvalue
        Y = noise_term(N, K, X, adjoint)
        assert np.linalg.eigvalsh(0.5 * (Y + Y.T))[0] >= -1e-12 * np.linalg.norm(X)


class TestMatricize:
    def test_scalar(self):
        op = matricize(scalar_system(-1.0, n1=1.0, k=1.0))
        assert_allclose(op.M, [[-1.0]])

    def test_identity_drift(self):
        sys = StochasticSystem(A=np.eye(2), N=[], B=np.zeros((2, 0)), C=np.zeros((0, 2)), K=np.zeros((0, 0)))
        assert_allclose(matricize(sys).M, 2 * np.eye(4))

    def test_matches_apply(self):
        sys = random_stable_system(3, seed=7)
        X = _random_symmetric(3, 8)
        for adjoint in (False, True):
            assert_allclose(matricize(sys, adjoint).apply(X), apply_operator(sys, X, adjoint), atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adjoint_is_transpose(self, seed):
        sys = random_stable_system(3, seed=seed)
        assert_allclose(matricize(sys, adjoint=True).M, matricize(sys).M.T, atol=1e-12)

    def test_symmetric_restriction_matches_apply(self):
        sys = random_stable_system(4, seed=9)
        X = _random_symmetric(4, 10)
        Ms = symmetric_matricization(sys)
        assert_allclose(unvech(Ms @ vech(X), 4), apply_operator(sys, X), atol=1e-12)

    def test_restriction_of_identity(self):
        assert_allclose(restrict_to_symmetric(np.eye(9), 3), np.eye(6))

    def test_budget(self):
        sys = random_stable_system(5)
        with pytest.raises(CapacityError):
            matricize(sys, max_dim=4)


class TestMeanSquareStability:
    def test_stable_scalar(self):
        certificate = mean_square_stability(scalar_system(-1.0, n1=1.0, k=1.0))
        assert certificate.abscissa == pytest.approx(-1.0)
        assert certificate.stable

    def test_noise_destabilizes(self):
        certificate = mean_square_stability(scalar_system(-0.4, n1=1.0, k=1.0))
        assert certificate.abscissa == pytest.approx(0.2)
        assert not certificate.stable

    def test_deterministic_spectrum(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((4, 4)) - 3 * np.eye(4)
        sys = StochasticSystem(A=A, N=[], B=np.zeros((4, 0)), C=np.zeros((0, 4)), K=np.zeros((0, 0)))
        expected = 2 * np.max(np.linalg.eigvals(A).real)
        assert mean_square_stability(sys).abscissa == pytest.approx(expected, rel=1e-8)

    def test_certificate_serializes(self):
        data = mean_square_stability(scalar_system(-1.0)).to_dict()
        assert data["stable"] is True
        assert data["witness_eigenvalue"] == [pytest.approx(-2.0), 0.0]


class TestHautus:
    def test_detectable_stable_scalar(self):
        assert hautus_detectability(scalar_system(-1.0, c=0.0)).holds

    def test_unstable_unobserved_scalar(self):
        result = hautus_detectability(scalar_system(1.0, c=0.0))
        assert not result.holds
        assert result.witness.eigenvalue == pytest.approx(2.0)
        assert_allclose(result.witness.V, [[1.0]])

    def test_unstable_observed_scalar(self):
        assert hautus_detectability(scalar_system(1.0, c=1.0)).holds

    def test_observable_scalar(self):
        assert hautus_observability(scalar_system(-1.0, c=1.0)).holds

    def test_unobservable_mode_witness(self):
        sys = StochasticSystem(A=np.diag([-1.0, -2.0]), N=[], B=np.zeros((2, 0)), C=[[1.0, 0.0]], K=np.zeros((0, 0)))
        result = hautus_observability(sys)
        assert not result.holds
        assert result.witness.eigenvalue == pytest.approx(-4.0)
        assert_allclose(result.witness.V, np.diag([0.0, 1.0]), atol=1e-10)
        # stable, so still detectable
        assert hautus_detectability(sys).holds

    def test_observed_by_both_states(self):
        sys = StochasticSystem(A=np.diag([-1.0, -2.0]), N=[], B=np.zeros((2, 0)), C=[[1.0, 1.0]], K=np.zeros((0, 0)))
        assert hautus_observability(sys).holds

    def test_result_serializes_witness(self):
        data = hautus_detectability(scalar_system(1.0, c=0.0)).to_dict()
        assert data["holds"] is False
        assert data["witness"]["eigenvalue"][0] == pytest.approx(2.0)


class TestStabilizabilityProbe:
    def test_unstable_scalar_with_input(self):
        probe = stabilizability_probe(scalar_system(1.0, b=1.0, c=1.0))
        assert probe.stabilizable
        assert_allclose(probe.F, [[-(1.0 + np.sqrt(2.0))]], rtol=1e-8)
        assert probe.certificate.stable

    def test_unstable_scalar_without_input(self):
        assert not stabilizability_probe(scalar_system(1.0, b=0.0, c=1.0))


class TestLinalgHelpers:
    def test_psd_factor_rank_deficient(self):
        K = np.array([[1.0, 1.0], [1.0, 1.0]])
        F = psd_factor(K)
        assert_allclose(F @ F.T, K, atol=1e-12)

    def test_vech_layout(self):
        X = np.array([[1.0, 2.0], [2.0, 3.0]])
        assert_allclose(vech(X), [1.0, 2.0, 3.0])
        assert_allclose(unvech(vech(X), 2), X)
