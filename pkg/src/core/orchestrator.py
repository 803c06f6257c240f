"""
Orchestrator - ReductionPipeline coordinating the LQG balanced truncation workflow.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

try:
    from .config import PipelineConfig, SimulationConfig, load_config
    from .errors import CertificateError, InputError
    from .operators import hautus_detectability, mean_square_stability, stabilizability_probe
    from .system import StochasticSystem
    from ..analyzers.bounds import (
        BoundContext, ErrorBoundReport, apriori_bound, beta_constant, error_bound_report, feedback_bound, gamma_T,
        open_loop_bound, weighted_bound,
    )
    from ..analyzers.certificates import PreservationCertificate, preservation_certificates
    from ..balancing.balanced_truncation import BalancedRealization, ReducedModel, balance, choose_order, truncate
    from ..deployers.bundles import load_system, write_csv, write_json
    from ..generators.heat_benchmark import build_heat_system
    from ..simulate.controls import ControlSpec
    from ..simulate.cost import cost_functional, weighted_l2_norm
    from ..simulate.error_systems import build_error_system, reduced_feedback_on_full
    from ..simulate.moments import MomentTrajectory, propagate_moments
    from ..simulate.sde import PathBatch, integrate_sde
    from ..solvers.gramians import GramianPair, compute_gramians
except ImportError:
    from core.config import PipelineConfig, SimulationConfig, load_config
    from core.errors import CertificateError, InputError
    from core.operators import hautus_detectability, mean_square_stability, stabilizability_probe
    from core.system import StochasticSystem
    from analyzers.bounds import (
        BoundContext, ErrorBoundReport, apriori_bound, beta_constant, error_bound_report, feedback_bound, gamma_T,
        open_loop_bound, weighted_bound,
    )
    from analyzers.certificates import PreservationCertificate, preservation_certificates
    from balancing.balanced_truncation import BalancedRealization, ReducedModel, balance, choose_order, truncate
    from deployers.bundles import load_system, write_csv, write_json
    from generators.heat_benchmark import build_heat_system
    from simulate.controls import ControlSpec
    from simulate.cost import cost_functional, weighted_l2_norm
    from simulate.error_systems import build_error_system, reduced_feedback_on_full
    from simulate.moments import MomentTrajectory, propagate_moments
    from simulate.sde import PathBatch, integrate_sde
    from solvers.gramians import GramianPair, compute_gramians

logger = logging.getLogger(__name__)

SIMULATION_MODES = ("open", "closed", "reduced-feedback")
SAMPLE_PATHS = 5
CHECKPOINTS = 20


@dataclass
class PipelineState:
    """Current state of the pipeline."""
    phase: str = "init"  # init, loaded, gramians, reduced, bounds, simulated
    system: StochasticSystem | None = None
    gramians: GramianPair | None = None
    balanced: BalancedRealization | None = None
    reduced: ReducedModel | None = None
    bounds: ErrorBoundReport | None = None
    certificates: PreservationCertificate | None = None
    error: str | None = None


@dataclass
class SimulationResult:
    """Moment trajectory, optional sample paths and the bound comparison."""
    mode: str
    moments: MomentTrajectory
    paths: PathBatch | None = None
    reference: MomentTrajectory | None = None
    summary: dict[str, Any] = field(default_factory=dict)

    def to_files(self, output_dir: Path) -> dict[str, Path]:
        """Write moments.csv, paths.csv (with sample paths) and summary.json."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        columns = self.moments.columns()
        if self.reference is not None:
            columns["reference_output_power"] = self.reference.output_power
        files = {"moments": write_csv(output_dir / "moments.csv", columns)}

        if self.paths is not None:
            mean, error = self.paths.output_power()
            index = np.rint(self.paths.t / self.moments.dt).astype(int)
            path_columns = {
                "t": self.paths.t,
                "mc_output_power": mean,
                "mc_standard_error": error,
                "moment_output_power": self.moments.output_power[index],
            }
            for k in range(min(SAMPLE_PATHS, self.paths.n_paths)):
                path_columns[f"y_path_{k + 1}"] = self.paths.y[k, :, 0]
            files["paths"] = write_csv(output_dir / "paths.csv", path_columns)

        files["summary"] = write_json(output_dir / "summary.json", self.summary)
        return files


class ReductionPipeline:
    """
    Coordinates the full workflow:
    1. Load a system bundle or build the heat benchmark
    2. Compute the Gramian pair (Q from the Riccati equation, P from the inequality)
    3. Balance and truncate
    4. Evaluate error bounds and preservation certificates
    5. Simulate error systems and compare with the bounds
    """

    def __init__(self, config: PipelineConfig | None = None, output_dir: Path | None = None):
        self.config = config or PipelineConfig()
        self.output_dir = output_dir or Path("./results")
        self.state = PipelineState()

    # =========================================================================
    # Phase 1: System
    # =========================================================================

    def set_system(self, sys: StochasticSystem) -> StochasticSystem:
        self.reset()
        self.state.system = sys
        self.state.phase = "loaded"
        return sys

    def load_system(self, directory: Path) -> StochasticSystem:
        try:
            sys, _ = load_system(directory)
        except Exception as e:
            self.state.error = f"Loading failed: {e}"
            raise
        return self.set_system(sys)

    def build_benchmark(self, **overrides) -> StochasticSystem:
        """Heat benchmark from the configured parameters, optionally overridden."""
        cfg = self.config.benchmark
        if overrides:
            values = {**cfg.__dict__, **{k: v for k, v in overrides.items() if v is not None}}
            cfg = type(cfg)(**values)
        try:
            sys = build_heat_system(cfg)
        except Exception as e:
            self.state.error = f"Benchmark construction failed: {e}"
            raise
        return self.set_system(sys)

    def check_preconditions(self) -> dict[str, Any]:
        """Mean-square stability, detectability and stabilizability of the loaded system."""
        sys = self._require_system()
        cfg = self.config
        stability = mean_square_stability(sys, max_dim=cfg.solver.max_dim)
        detectable = hautus_detectability(
            sys, tol=cfg.balancing.hautus_tol, samples=cfg.balancing.hautus_samples,
            seed=cfg.solver.seed, max_dim=cfg.solver.max_dim,
        )
        probe = stabilizability_probe(sys, cfg.solver)
        return {
            "mean_square_stable": stability.stable,
            "spectral_abscissa": stability.abscissa,
            "detectable": detectable.holds,
            "stabilizable": probe.stabilizable,
        }

    # =========================================================================
    # Phase 2: Gramians
    # =========================================================================

    def compute_gramians(self, strategy: str = "subgradient_feasibility") -> GramianPair:
        sys = self._require_system()
        self.state.phase = "gramians"
        try:
            pair = compute_gramians(sys, self.config.solver, strategy)
        except Exception as e:
            self.state.error = f"Gramian computation failed: {e}"
            raise
        self.state.gramians = pair
        self.state.balanced = None
        return pair

    def set_gramians(self, P: np.ndarray, Q: np.ndarray) -> None:
        """Use an externally computed pair (as loaded from a Gramian bundle)."""
        sys = self._require_system()
        certificate = mean_square_stability(sys.replace(A=sys.A - sys.B @ sys.B.T @ Q), max_dim=self.config.solver.max_dim)
        self.state.gramians = GramianPair(P=P, Q=Q, q_residual=float("nan"), p_margin=float("nan"),
                                          iterations=0, closed_loop_certificate=certificate, strategy="loaded")
        self.state.balanced = None

    # =========================================================================
    # Phase 3: Reduction
    # =========================================================================

    def balance(self) -> BalancedRealization:
        if not self.state.gramians:
            raise InputError("No gramians available. Run compute_gramians first.")
        if self.state.balanced is None:
            pair = self.state.gramians
            self.state.balanced = balance(self.state.system, pair.P, pair.Q)
        return self.state.balanced

    def reduce(self, r: int | None = None, tol: float | None = None) -> ReducedModel:
        """Truncate to order r, or to the order choose_order picks for tol."""
        if (r is None) == (tol is None):
            raise InputError("Give exactly one of r and tol")
        self.state.phase = "reduced"
        try:
            bal = self.balance()
            gap_tol = self.config.balancing.gap_tol
            if tol is not None:
                choice = choose_order(bal.sigma, tol, gap_tol)
                if choice.warning:
                    logger.warning(choice.warning)
                r = choice.r
            reduced = truncate(bal, r, gap_tol)
        except Exception as e:
            self.state.error = f"Reduction failed: {e}"
            raise
        self.state.reduced = reduced
        return reduced

    # =========================================================================
    # Phase 4: Bounds and certificates
    # =========================================================================

    def evaluate_bounds(self, T: float = math.inf, gamma_method: str = "worst_case") -> tuple[ErrorBoundReport, PreservationCertificate]:
        if not self.state.reduced:
            raise InputError("No reduced model available. Run reduce first.")
        self.state.phase = "bounds"
        pair, bal, reduced = self.state.gramians, self.state.balanced, self.state.reduced
        try:
            report = error_bound_report(
                self.state.system, pair.P, pair.Q, bal.sigma, reduced,
                T=T, gamma_method=gamma_method, sim_cfg=self.config.simulation,
            )
            certificates = preservation_certificates(bal, reduced, self.config.balancing, self.config.solver.max_dim)
        except Exception as e:
            self.state.error = f"Bound evaluation failed: {e}"
            raise
        self.state.bounds = report
        self.state.certificates = certificates
        return report, certificates

    # =========================================================================
    # Phase 5: Simulation
    # =========================================================================

    def simulate(
        self,
        mode: str = "closed",
        signal: Callable | np.ndarray | None = None,
        sim_cfg: SimulationConfig | None = None,
    ) -> SimulationResult:
        """
        Simulate an error system (open/closed) or the full model under the
        reduced feedback, and compare with the bounds.

        Args:
            mode: "open", "closed" or "reduced-feedback"
            signal: deterministic input u (open) or offset u¹ (closed, reduced-feedback)
            sim_cfg: grid and Monte Carlo settings, the configured ones by default
        """
        if mode not in SIMULATION_MODES:
            raise InputError(f"Unknown simulation mode: {mode}. Available: {list(SIMULATION_MODES)}")
        if not self.state.reduced:
            raise InputError("No reduced model available. Run reduce first.")
        cfg = sim_cfg or self.config.simulation
        self.state.phase = "simulated"
        try:
            if mode == "reduced-feedback":
                result = self._simulate_reduced_feedback(signal, cfg)
            else:
                result = self._simulate_error(mode, signal, cfg)
        except Exception as e:
            self.state.error = f"Simulation failed: {e}"
            raise
        return result

    def _simulate_error(self, mode: str, signal, cfg: SimulationConfig) -> SimulationResult:
        sys, pair, reduced = self.state.system, self.state.gramians, self.state.reduced
        sigma, r = self.state.balanced.sigma, reduced.r
        control = ControlSpec.zero() if signal is None else ControlSpec.open_loop(signal)
        zero = np.zeros(sys.n + r)

        if mode == "open":
            error_sys = build_error_system(sys, reduced, "open_loop")
        else:
            error_sys = build_error_system(sys, reduced, "closed_loop", Q=pair.Q, include_control_error=True)
        moments = propagate_moments(error_sys, control, cfg, x0=zero)
        t = moments.t
        error_norm = weighted_l2_norm(t, moments.output_power)
        input_norm = weighted_l2_norm(t, moments.input_power)
        summary: dict[str, Any] = {"mode": mode, "r": r, "T": float(t[-1]), "dt": cfg.dt, "error_norm": error_norm,
                                   "input_norm": input_norm}

        if mode == "closed":
            bound = feedback_bound(sigma, r, input_norm)
            summary["bounds"] = {"feedback": {"value": bound, "holds": error_norm <= bound}}
        else:
            full = propagate_moments(sys, control, cfg, observables={"terminal": pair.Q}, x0=np.zeros(sys.n))
            context = BoundContext.finite(float(t[-1]), cost_functional(full).value, float(full.observables["terminal"][-1]))
            gamma = gamma_T(reduced, float(t[-1]), "worst_case")
            bounds = self.state.bounds
            if bounds is not None and bounds.gamma_T is not None and bounds.T == t[-1]:
                gamma = bounds.gamma_T
            beta = beta_constant(sys, pair.P, pair.Q)
            weighted_error = weighted_l2_norm(t, moments.output_power, beta)
            weighted_input = weighted_l2_norm(t, moments.input_power, beta)
            open_bound = open_loop_bound(sigma, r, gamma, context)
            w_bound = weighted_bound(sigma, r, beta, weighted_input)
            summary["bounds"] = {
                "apriori": {"value": apriori_bound(sigma, r, context)},
                "open_loop": {"value": open_bound, "gamma_T": gamma, "holds": error_norm <= open_bound},
                "weighted": {"value": w_bound, "beta": beta, "weighted_error": weighted_error,
                             "holds": weighted_error <= w_bound},
            }

        paths = None
        if cfg.n_paths > 0:
            paths = integrate_sde(error_sys, control, cfg, x0=zero)
            summary["monte_carlo"] = self._compare_paths(moments, paths)
        return SimulationResult(mode=mode, moments=moments, paths=paths, summary=summary)

    def _simulate_reduced_feedback(self, signal, cfg: SimulationConfig) -> SimulationResult:
        sys, reduced = self.state.system, self.state.reduced
        closed = reduced_feedback_on_full(sys, reduced)
        control = ControlSpec.zero() if signal is None else ControlSpec.open_loop(signal)
        x0 = cfg.resolve_x0(sys.n)
        controlled = propagate_moments(closed, control, cfg, x0=x0)
        uncontrolled = propagate_moments(sys, control, cfg, x0=x0)
        certificate = mean_square_stability(closed, max_dim=self.config.solver.max_dim)
        summary: dict[str, Any] = {
            "mode": "reduced-feedback",
            "r": reduced.r,
            "T": float(controlled.t[-1]),
            "dt": cfg.dt,
            "closed_loop": certificate.to_dict(),
            "controlled_final_power": float(controlled.output_power[-1]),
            "uncontrolled_final_power": float(uncontrolled.output_power[-1]),
            "controlled_decays": bool(controlled.output_power[-1] < controlled.output_power[0]),
            "uncontrolled_grows": bool(uncontrolled.output_power[-1] > uncontrolled.output_power[0]),
        }
        paths = None
        if cfg.n_paths > 0:
            paths = integrate_sde(closed, control, cfg, x0=x0)
            summary["monte_carlo"] = self._compare_paths(controlled, paths)
        return SimulationResult(mode="reduced-feedback", moments=controlled, paths=paths,
                                reference=uncontrolled, summary=summary)

    @staticmethod
    def _compare_paths(moments: MomentTrajectory, paths: PathBatch) -> dict[str, Any]:
        """Sample mean of ‖y‖² against the moments at equispaced checkpoints."""
        mean, error = paths.output_power()
        index = np.rint(paths.t / moments.dt).astype(int)
        exact = moments.output_power[index]
        checkpoints = np.unique(np.linspace(1, paths.t.size - 1, CHECKPOINTS).round().astype(int))
        deviation = np.abs(mean[checkpoints] - exact[checkpoints])
        within = deviation <= 3.0 * error[checkpoints] + 1e-14 * np.maximum(exact[checkpoints], 1.0)
        return {
            "n_paths": paths.n_paths,
            "seed": paths.seed,
            "checkpoints": int(checkpoints.size),
            "within_3se": int(np.sum(within)),
            "consistent": bool(np.all(within)),
            "cost": cost_functional(paths).to_dict(),
        }

    # =========================================================================
    # Utility Methods
    # =========================================================================

    def _require_system(self) -> StochasticSystem:
        if not self.state.system:
            raise InputError("No system available. Run load_system or build_benchmark first.")
        return self.state.system

    def require_certificates(self) -> None:
        """Raise CertificateError unless every recorded certificate passed."""
        certificates = self.state.certificates
        if certificates is not None and not certificates.passed:
            raise CertificateError("Preservation certificates failed for the reduced model")

    def get_status(self) -> str:
        sys = self.state.system
        parts = [f"Phase: {self.state.phase}"]
        if sys is not None:
            parts.append(f"n={sys.n}")
        if self.state.reduced is not None:
            parts.append(f"r={self.state.reduced.r}")
        if self.state.error:
            parts.append(f"error: {self.state.error}")
        return ", ".join(parts)

    def reset(self) -> None:
        self.state = PipelineState()


def create_pipeline(config_path: Path | str | None = None, output_dir: Path | None = None) -> ReductionPipeline:
    """Factory function to create a pipeline from a YAML config file."""
    return ReductionPipeline(load_config(config_path), output_dir)
