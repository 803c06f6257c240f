"""
Energy interpretation of the Gramians, checked numerically.

(a) reachability: sup_t E⟨x(t), p_i⟩² ≤ λ_{P,i}·J_T(0, u) for a test input u
(b) observability: J_∞(q_i, u_F) = λ_{Q,i} for the feedback u_F = −BᵀQx
(c) open loop: ∫₀ᵀ e^{−bs} E‖y(s, q_i, 0)‖² ds ≤ λ_{Q,i} with b = ‖BᵀQ^{1/2}‖₂²
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

try:
    from ..core.config import SimulationConfig
    from ..core.errors import InputError
    from ..core.linalg import ordered_eigh
    from ..core.operators import mean_square_stability
    from ..core.system import StochasticSystem
    from ..generators.heat_benchmark import reference_input
    from ..simulate.controls import ControlSpec
    from ..simulate.cost import cost_functional, weighted_l2_norm
    from ..simulate.error_systems import driving_variable_system
    from ..simulate.moments import propagate_moments
    from .bounds import b_constant
except ImportError:
    from core.config import SimulationConfig
    from core.errors import InputError
    from core.linalg import ordered_eigh
    from core.operators import mean_square_stability
    from core.system import StochasticSystem
    from generators.heat_benchmark import reference_input
    from simulate.controls import ControlSpec
    from simulate.cost import cost_functional, weighted_l2_norm
    from simulate.error_systems import driving_variable_system
    from simulate.moments import propagate_moments
    from analyzers.bounds import b_constant

logger = logging.getLogger(__name__)

EQUALITY_TOL = 5e-3
DECAY_TARGET = 1e-10


@dataclass
class EnergyCheck:
    """One inequality lhs ≤ rhs evaluated numerically."""
    lhs: float
    rhs: float
    holds: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, **self.details}


@dataclass
class EnergyReport:
    index: int
    lambda_P: float
    lambda_Q: float
    reachability: EnergyCheck
    observability: EnergyCheck
    open_loop: EnergyCheck

    @property
    def passed(self) -> bool:
        return self.reachability.holds and self.observability.holds and self.open_loop.holds

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "lambda_P": self.lambda_P,
            "lambda_Q": self.lambda_Q,
            "reachability": self.reachability.to_dict(),
            "observability": self.observability.to_dict(),
            "open_loop": self.open_loop.to_dict(),
            "passed": self.passed,
        }


def _leq(lhs: float, rhs: float, rel: float = 1e-6) -> bool:
    return lhs <= rhs * (1.0 + rel) + 1e-12


def reachability_check(sys: StochasticSystem, lam: float, p: np.ndarray, cfg: SimulationConfig,
                       test_input: Callable | None = None) -> EnergyCheck:
    control = ControlSpec.open_loop(test_input or reference_input)
    traj = propagate_moments(sys, control, cfg, observables={"p": np.outer(p, p)}, x0=np.zeros(sys.n))
    energy = cost_functional(traj).value
    lhs = float(traj.observables["p"].max())
    return EnergyCheck(lhs=lhs, rhs=lam * energy, holds=_leq(lhs, lam * energy), details={"J_T": energy})


def observability_check(sys: StochasticSystem, Q: np.ndarray, lam: float, q: np.ndarray,
                        cfg: SimulationConfig) -> EnergyCheck:
    """J_∞(q_i, u_F) from the moments of the driving-variable loop, compared to λ_{Q,i}."""
    loop = driving_variable_system(sys, Q)
    certificate = mean_square_stability(loop)
    if not certificate.stable:
        return EnergyCheck(lhs=math.inf, rhs=lam, holds=False,
                           details={"closed_loop_abscissa": certificate.abscissa})
    horizon = math.log(1.0 / DECAY_TARGET) / abs(certificate.abscissa)
    traj = propagate_moments(loop, ControlSpec.zero(), cfg.with_updates(T=max(horizon, cfg.dt)), x0=q)
    cost = cost_functional(traj).value
    algebraic = float(q @ Q @ q)
    gap = abs(cost - lam) / max(lam, 1e-300)
    equality = gap <= EQUALITY_TOL
    # the feedback attains λ_{Q,i}; J_∞ carries discretization error of either sign
    return EnergyCheck(
        lhs=cost,
        rhs=lam,
        holds=_leq(cost, lam, EQUALITY_TOL) and equality,
        details={"horizon": horizon, "algebraic": algebraic, "relative_gap": gap, "equality": equality},
    )


def open_loop_check(sys: StochasticSystem, Q: np.ndarray, lam: float, q: np.ndarray,
                    cfg: SimulationConfig) -> EnergyCheck:
    b = b_constant(sys, Q)
    traj = propagate_moments(sys, ControlSpec.zero(), cfg, x0=q)
    lhs = weighted_l2_norm(traj.t, traj.output_power, b) ** 2
    return EnergyCheck(lhs=lhs, rhs=lam, holds=_leq(lhs, lam), details={"b": b})


def energy_estimate_check(
    sys: StochasticSystem,
    P: np.ndarray,
    Q: np.ndarray,
    index: int,
    T: float,
    sim_cfg: SimulationConfig | None = None,
    test_input: Callable | None = None,
) -> EnergyReport:
    """
    Evaluate the three energy estimates for the index-th eigenpairs of P and Q
    (descending eigenvalues, 0-based).

    Args:
        sys: system the Gramians belong to
        P, Q: reachability and observability Gramians
        index: eigenpair index
        T: horizon of checks (a) and (c); (b) picks its own decay horizon
        sim_cfg: time step of the moment propagation
        test_input: input of check (a), the reference input by default

    Returns:
        EnergyReport; a failed inequality is reported, not raised
    """
    if not 0 <= index < sys.n:
        raise InputError(f"Eigen index {index} outside 0..{sys.n - 1}")
    cfg = (sim_cfg or SimulationConfig()).with_updates(T=T)
    lam_P, V_P = ordered_eigh(P)
    lam_Q, V_Q = ordered_eigh(Q)
    p, q = V_P[:, index], V_Q[:, index]

    report = EnergyReport(
        index=index,
        lambda_P=float(lam_P[index]),
        lambda_Q=float(lam_Q[index]),
        reachability=reachability_check(sys, float(lam_P[index]), p, cfg, test_input),
        observability=observability_check(sys, Q, float(lam_Q[index]), q, cfg),
        open_loop=open_loop_check(sys, Q, float(lam_Q[index]), q, cfg),
    )
    logger.info("Energy checks for index %d: %s", index, "pass" if report.passed else "FAIL")
    return report
