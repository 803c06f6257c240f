import math

import numpy as np
import pytest

from analyzers.bounds import (
    BoundContext,
    apriori_bound,
    b_r_constant,
    error_bound_report,
    feedback_bound,
    gamma_T,
    gamma_T_estimate,
    open_loop_bound,
    plain_tail,
    weighted_bound,
)
from balancing.balanced_truncation import ReducedModel, balance, tail_coefficient, truncate
from core.config import SimulationConfig
from core.errors import InputError, UnsupportedError
from core.system import scalar_system

SIGMA = np.array([1.0, 1e-3, 1e-4])


def _scalar_reduced(a: float = -1.0, b: float = 1.0, c: float = 1.0, sigma: float = 0.5) -> ReducedModel:
    return ReducedModel(
        system=scalar_system(a, b=b, c=c),
        sigma_r=np.array([sigma]),
        V=np.eye(1),
        W=np.eye(1),
        r=1,
    )


def _volterra_norm(T: float, h: float) -> float:
    """Largest singular value of the midpoint discretization of u ↦ ∫₀ᵗ e^{−(t−s)}u(s)ds."""
    t = (np.arange(int(round(T / h))) + 0.5) * h
    kernel = np.tril(np.exp(-(t[:, None] - t[None, :])), -1) * h
    kernel[np.diag_indices_from(kernel)] = 0.5 * h
    return float(np.linalg.norm(kernel, 2))


class TestBoundContext:
    def test_finite_energy(self):
        assert BoundContext.finite(T=1.0, cost=3.0, terminal=1.0).energy_norm == pytest.approx(2.0)

    def test_infinite_energy(self):
        context = BoundContext.infinite(pair_norm=0.25)
        assert not context.is_finite
        assert context.energy_norm == 0.25

    def test_negative_energy(self):
        with pytest.raises(InputError):
            BoundContext.finite(T=1.0, cost=-1.0)

    def test_non_positive_horizon(self):
        with pytest.raises(InputError):
            BoundContext.finite(T=0.0, cost=1.0)


class TestBounds:
    def test_apriori(self):
        expected = 2.0 * (1e-3 / math.sqrt(1 + 1e-6) + 1e-4 / math.sqrt(1 + 1e-8))
        value = apriori_bound(SIGMA, 1, BoundContext.finite(T=1.0, cost=1.0))
        assert value == pytest.approx(expected, rel=1e-12)
        assert value == pytest.approx(2.2e-3, rel=1e-5)

    def test_feedback(self):
        assert feedback_bound(SIGMA, 1, 3.0) == pytest.approx(3.0 * tail_coefficient(SIGMA, 1))
        assert feedback_bound(SIGMA, 1, 3.0) == pytest.approx(0.0066, rel=1e-5)

    def test_feedback_negative_norm(self):
        with pytest.raises(InputError):
            feedback_bound(SIGMA, 1, -1.0)

    def test_open_loop(self):
        context = BoundContext.infinite(pair_norm=1.0)
        assert open_loop_bound(SIGMA, 2, 2.0, context) == pytest.approx(3.0 * tail_coefficient(SIGMA, 2))

    def test_weighted(self):
        assert plain_tail(SIGMA, 1) == pytest.approx(2.2e-3)
        assert weighted_bound(SIGMA, 1, 0.5, 2.0) == pytest.approx(4.4e-3)

    def test_full_order_has_no_tail(self):
        assert apriori_bound(SIGMA, 3, BoundContext.finite(T=1.0, cost=5.0)) == 0.0
        assert plain_tail(SIGMA, 3) == 0.0

    @pytest.mark.parametrize("r", [0, 4])
    def test_order_out_of_range(self, r):
        with pytest.raises(InputError):
            plain_tail(SIGMA, r)


class TestGammaT:
    def test_b_r_constant(self):
        assert b_r_constant(_scalar_reduced(b=2.0, sigma=0.5)) == pytest.approx(2.0)

    def test_worst_case(self):
        reduced = _scalar_reduced(b=1.0, sigma=0.5)
        assert gamma_T(reduced, 2.0) == pytest.approx(math.e)
        assert gamma_T_estimate(reduced, 2.0)[1] is None

    def test_worst_case_needs_finite_horizon(self):
        with pytest.raises(UnsupportedError):
            gamma_T(_scalar_reduced(), math.inf)

    def test_unknown_method(self):
        with pytest.raises(InputError):
            gamma_T(_scalar_reduced(), 1.0, method="bisection")

    def test_operator_norm_dense_path(self):
        cfg = SimulationConfig(T=1.0, dt=0.1)
        value, h = gamma_T_estimate(_scalar_reduced(), 1.0, "operator_norm", cfg)
        assert h == 0.1
        assert value == pytest.approx(_volterra_norm(1.0, 0.1), rel=5e-2)

    def test_operator_norm_matches_volterra_operator(self):
        cfg = SimulationConfig(T=5.0, dt=1e-2)
        value = gamma_T(_scalar_reduced(), 5.0, "operator_norm", cfg)
        assert value == pytest.approx(_volterra_norm(5.0, 1e-2), rel=1e-2)

    def test_operator_norm_grows_with_horizon(self):
        cfg = SimulationConfig(T=4.0, dt=0.05)
        short = gamma_T(_scalar_reduced(), 1.0, "operator_norm", cfg)
        long = gamma_T(_scalar_reduced(), 4.0, "operator_norm", cfg)
        assert short < long <= 1.0 + 1e-2

    def test_operator_norm_infinite_horizon(self):
        # the transfer function 1/(s+1) has peak gain 1
        cfg = SimulationConfig(T=8.0, dt=0.05)
        value = gamma_T(_scalar_reduced(), math.inf, "operator_norm", cfg)
        assert 0.9 < value <= 1.0 + 1e-2

    def test_operator_norm_infinite_horizon_needs_stability(self):
        with pytest.raises(UnsupportedError):
            gamma_T(_scalar_reduced(a=1.0), math.inf, "operator_norm", SimulationConfig(T=1.0, dt=0.1))


class TestReport:
    @pytest.fixture
    def balanced(self, small_system):
        return balance(small_system, np.diag([3.0, 2.0, 1.0]), np.diag([3.0, 2.0, 1.0]))

    def test_full_order_report(self, balanced):
        Sigma = np.diag(balanced.sigma)
        report = error_bound_report(balanced.system, Sigma, Sigma, balanced.sigma, truncate(balanced, 3), T=1.0)
        assert report.tail_coefficient == 0.0
        assert report.plain_tail == 0.0
        assert report.gamma_T == pytest.approx(math.exp(report.b_r))
        assert report.beta >= report.b

    def test_infinite_horizon_skips_worst_case(self, balanced):
        Sigma = np.diag(balanced.sigma)
        report = error_bound_report(balanced.system, Sigma, Sigma, balanced.sigma, truncate(balanced, 1))
        assert report.gamma_T is None
        data = report.to_dict()
        assert data["T"] == "inf"
        assert data["tail_coefficient"] == pytest.approx(tail_coefficient(balanced.sigma, 1))
