"""End-to-end checks on the n=36 heat benchmark."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from analyzers.bounds import gamma_T, plain_tail
from analyzers.certificates import MARGIN_TOL, preservation_certificates
from analyzers.energy import observability_check
from balancing.balanced_truncation import tail_coefficient, truncate
from core.config import SimulationConfig
from core.linalg import ordered_eigh
from core.operators import hautus_observability, mean_square_stability
from generators.heat_benchmark import reference_input
from solvers.gramians import reachability_margin, riccati_residual

pytestmark = pytest.mark.slow

ADMISSIBLE_ORDERS = range(2, 13)


class TestBenchmarkGramians:
    def test_riccati_residual(self, heat_pipeline):
        sys, Q = heat_pipeline.state.system, heat_pipeline.state.gramians.Q
        CtC = sys.C.T @ sys.C
        assert np.linalg.norm(riccati_residual(sys, Q)) <= 1e-8 * np.linalg.norm(CtC)

    def test_reachability_margin(self, heat_pipeline):
        sys, P = heat_pipeline.state.system, heat_pipeline.state.gramians.P
        assert reachability_margin(sys, P) <= 1e-8
        assert np.linalg.eigvalsh(P)[0] > 0

    def test_observable_benchmark_has_definite_Q(self, heat_pipeline):
        sys, Q = heat_pipeline.state.system, heat_pipeline.state.gramians.Q
        lambda_min = np.linalg.eigvalsh(Q)[0]
        assert not hautus_observability(sys).holds or lambda_min > 0
        assert lambda_min > 1e-14 * np.linalg.norm(Q, 2)

    def test_lqg_closed_loop_is_stable(self, heat_pipeline):
        assert heat_pipeline.state.gramians.closed_loop_certificate.abscissa < 0

    def test_open_loop_is_unstable(self, heat_pipeline):
        assert not mean_square_stability(heat_pipeline.state.system).stable


class TestBenchmarkBalancing:
    def test_invariants(self, heat_pipeline):
        bal = heat_pipeline.state.balanced
        P, Q = heat_pipeline.state.gramians.P, heat_pipeline.state.gramians.Q
        Sigma = np.diag(bal.sigma)
        S, S_inv = bal.S_b, bal.S_b_inv
        assert np.linalg.norm(S @ P @ S.T - Sigma) <= 1e-8 * bal.sigma[0]
        assert np.linalg.norm(S_inv.T @ Q @ S_inv - Sigma) <= 1e-8 * bal.sigma[0]

    def test_singular_value_decay(self, heat_pipeline):
        sigma = heat_pipeline.state.balanced.sigma
        assert np.all(np.diff(sigma) <= 0)
        assert sigma[10] / sigma[0] <= 1e-3

    def test_projection(self, heat_pipeline):
        reduced = truncate(heat_pipeline.state.balanced, 10)
        assert_allclose(reduced.W @ reduced.V, np.eye(10), atol=1e-10)


class TestPreservation:
    @pytest.mark.parametrize("r", ADMISSIBLE_ORDERS)
    def test_certificates(self, heat_pipeline, r):
        bal = heat_pipeline.state.balanced
        certificate = preservation_certificates(bal, truncate(bal, r))
        assert certificate.reduced_closed_loop.abscissa < 0
        assert certificate.reduced_detectable
        assert max(certificate.typeII_margins) <= MARGIN_TOL

    def test_reduced_feedback_stabilizes_full_model(self, heat_pipeline):
        heat_pipeline.reduce(r=10)
        cfg = SimulationConfig(T=10.0, dt=1e-2, x0="random-unit", seed=0)
        result = heat_pipeline.simulate("reduced-feedback", None, cfg)
        assert result.summary["closed_loop"]["stable"]
        assert result.summary["controlled_decays"]
        assert result.summary["uncontrolled_grows"]


class TestErrorBounds:
    @pytest.mark.parametrize("r", [6, 10])
    def test_closed_loop_bound(self, heat_pipeline, r):
        heat_pipeline.reduce(r=r)
        cfg = SimulationConfig(T=10.0, dt=1e-2)
        result = heat_pipeline.simulate("closed", reference_input, cfg)
        summary = result.summary
        bound = summary["bounds"]["feedback"]["value"]
        assert bound == pytest.approx(tail_coefficient(heat_pipeline.state.balanced.sigma, r) * summary["input_norm"])
        assert summary["error_norm"] <= 0.99 * bound

    def test_weighted_bound(self, heat_pipeline):
        heat_pipeline.reduce(r=10)
        cfg = SimulationConfig(T=10.0, dt=1e-2)
        weighted = heat_pipeline.simulate("open", reference_input, cfg).summary["bounds"]["weighted"]
        assert weighted["weighted_error"] <= weighted["value"]

    def test_apriori_bound_recomputed(self, heat_pipeline):
        sigma = heat_pipeline.state.balanced.sigma
        exact = 2.0 * math.fsum(s / math.sqrt(1.0 + s * s) for s in sigma[10:])
        assert tail_coefficient(sigma, 10) == pytest.approx(exact, rel=1e-12)
        assert plain_tail(sigma, 10) >= tail_coefficient(sigma, 10)

    def test_operator_norm_below_worst_case(self, heat_pipeline):
        reduced = truncate(heat_pipeline.state.balanced, 6)
        cfg = SimulationConfig(T=2.0, dt=5e-2)
        assert gamma_T(reduced, 2.0, "operator_norm", cfg) <= gamma_T(reduced, 2.0, "worst_case")


class TestObservabilityEnergy:
    @pytest.mark.parametrize("index", [0, 1, 2, 33, 34, 35])
    def test_cost_equals_eigenvalue(self, heat_pipeline, index):
        sys, Q = heat_pipeline.state.system, heat_pipeline.state.gramians.Q
        lam, V = ordered_eigh(Q)
        check = observability_check(sys, Q, float(lam[index]), V[:, index], SimulationConfig(dt=5e-3))
        assert check.details["relative_gap"] <= 5e-3


class TestMonteCarlo:
    def test_closed_loop_error_paths(self, heat_pipeline):
        heat_pipeline.reduce(r=10)
        cfg = SimulationConfig(T=1.0, dt=1e-3, n_paths=10_000, seed=42, record_every=50)
        result = heat_pipeline.simulate("closed", reference_input, cfg)
        mc = result.summary["monte_carlo"]
        assert mc["checkpoints"] == 20
        assert mc["within_3se"] >= 19
