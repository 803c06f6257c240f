import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_stable_system
from balancing.balanced_truncation import (
    balance,
    choose_order,
    gap_holds,
    hat_sigma,
    tail_coefficient,
    truncate,
)
from core.errors import InputError, OrderSelectionError, PreconditionError


def _spd(n: int, seed: int) -> np.ndarray:
    G = np.random.default_rng(seed).standard_normal((n, n))
    return G @ G.T + 0.5 * np.eye(n)


class TestBalance:
    def test_diagonal_pair(self):
        sys = random_stable_system(2)
        P = Q = np.diag([4.0, 1.0])
        bal = balance(sys, P, Q)
        assert_allclose(bal.sigma, [4.0, 1.0])
        assert_allclose(bal.S_b, np.eye(2), atol=1e-14)

    def test_identity_pair_gives_orthogonal_transform(self):
        bal = balance(random_stable_system(3), np.eye(3), np.eye(3))
        assert_allclose(bal.sigma, np.ones(3))
        assert_allclose(bal.S_b @ bal.S_b.T, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_diagonalizes_random_pairs(self, seed):
        n = 6
        P, Q = _spd(n, seed), _spd(n, seed + 100)
        bal = balance(random_stable_system(n), P, Q)
        Sigma = np.diag(bal.sigma)
        S, S_inv = bal.S_b, bal.S_b_inv
        assert_allclose(S @ S_inv, np.eye(n), atol=1e-10)
        assert np.linalg.norm(S @ P @ S.T - Sigma) <= 1e-8 * bal.sigma[0]
        assert np.linalg.norm(S_inv.T @ Q @ S_inv - Sigma) <= 1e-8 * bal.sigma[0]
        assert np.all(np.diff(bal.sigma) <= 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_sigma_invariant_under_state_transformation(self, seed):
        # (P, Q) ↦ (SPSᵀ, S⁻ᵀQS⁻¹) for x̃ = Sx leaves the singular values unchanged
        n = 5
        rng = np.random.default_rng(seed + 200)
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        S = U @ np.diag(np.linspace(0.5, 2.0, n)) @ V.T
        S_inv = np.linalg.inv(S)
        sys = random_stable_system(n, seed=seed)
        P, Q = _spd(n, seed), _spd(n, seed + 100)
        original = balance(sys, P, Q)
        moved = balance(sys.transformed(S, S_inv), S @ P @ S.T, S_inv.T @ Q @ S_inv)
        assert np.max(np.abs(moved.sigma - original.sigma)) <= 1e-8 * original.sigma[0]

    def test_balanced_system_is_transformed(self):
        sys = random_stable_system(3, seed=4)
        bal = balance(sys, _spd(3, 1), _spd(3, 2))
        assert_allclose(bal.A_n, bal.S_b @ sys.A @ bal.S_b_inv, atol=1e-12)
        assert_allclose(bal.C_n, sys.C @ bal.S_b_inv, atol=1e-12)

    def test_singular_Q(self):
        with pytest.raises(PreconditionError):
            balance(random_stable_system(2), np.eye(2), np.diag([1.0, 0.0]))

    def test_indefinite_P(self):
        with pytest.raises(InputError):
            balance(random_stable_system(2), np.diag([1.0, -1.0]), np.eye(2))


class TestTruncate:
    @pytest.fixture
    def balanced(self):
        sys = random_stable_system(4, m=2, p=1, seed=5)
        return balance(sys, np.diag([8.0, 4.0, 2.0, 1.0]), np.diag([8.0, 4.0, 2.0, 1.0]))

    def test_identity_truncation(self, balanced):
        reduced = truncate(balanced, 4)
        assert_allclose(reduced.A_r, balanced.A_n)
        assert_allclose(reduced.B_r, balanced.B_n)
        assert_allclose(reduced.W @ reduced.V, np.eye(4), atol=1e-12)

    def test_block_reading(self, balanced):
        reduced = truncate(balanced, 1)
        assert_allclose(reduced.A_r, balanced.A_n[:1, :1])
        assert_allclose(reduced.B_r, balanced.B_n[:1, :])
        assert_allclose(reduced.C_r, balanced.C_n[:, :1])
        assert_allclose(reduced.N_r[0], balanced.N_n[0][:1, :1])
        assert_allclose(reduced.Sigma_r, [[8.0]])

    def test_petrov_galerkin_maps(self, balanced):
        reduced = truncate(balanced, 2)
        assert_allclose(reduced.W @ reduced.V, np.eye(2), atol=1e-10)
        assert reduced.system.metadata["reduced_order"] == 2

    def test_gap_violation_suggests_order(self):
        sys = random_stable_system(3)
        bal = balance(sys, np.diag([5.0, 2.0, 2.0]), np.diag([5.0, 2.0, 2.0]))
        with pytest.raises(OrderSelectionError) as excinfo:
            truncate(bal, 2)
        assert excinfo.value.suggestion == 1

    def test_order_out_of_range(self, balanced):
        with pytest.raises(InputError):
            truncate(balanced, 0)


class TestChooseOrder:
    def test_tolerance_picks_smallest_order(self):
        choice = choose_order([10.0, 1.0, 1e-6], 1e-4)
        assert choice.r == 2
        assert choice.warning is None

    def test_loose_tolerance(self):
        sigma = np.array([3.0, 1.0, 0.5])
        choice = choose_order(sigma, 2.0 * np.sum(hat_sigma(sigma)))
        assert choice.r == 1

    def test_equal_trailing_values_return_n(self):
        # the tolerance alone would stop at r=2, inside the tie
        choice = choose_order([5.0, 2.0, 2.0], 2.0)
        assert choice.r == 3
        assert choice.warning

    def test_full_order_from_tolerance_is_silent(self):
        # no r < 3 meets a zero tolerance; r = n is the answer, not a fallback
        choice = choose_order([3.0, 1.0, 0.5], 0.0)
        assert choice.r == 3
        assert choice.warning is None

    def test_rejects_increasing_sigma(self):
        with pytest.raises(InputError):
            choose_order([1.0, 2.0], 1e-3)


class TestSingularValueHelpers:
    def test_hat_sigma(self):
        assert_allclose(hat_sigma([0.0, 1.0]), [0.0, 1.0 / np.sqrt(2.0)])

    def test_tail_coefficient(self):
        sigma = np.array([1.0, 1e-3, 1e-4])
        expected = 2 * (1e-3 / np.sqrt(1 + 1e-6) + 1e-4 / np.sqrt(1 + 1e-8))
        assert tail_coefficient(sigma, 1) == pytest.approx(expected, rel=1e-12)
        assert tail_coefficient(sigma, 3) == 0.0

    def test_gap_holds(self):
        sigma = np.array([5.0, 2.0, 2.0])
        assert gap_holds(sigma, 1)
        assert not gap_holds(sigma, 2)
        assert gap_holds(sigma, 3)
