"""
Error bounds of LQG balanced truncation for stochastic systems.

All bounds share the tail coefficient 2·Σ_{k>r} σ_k/√(1+σ_k²) or its plain
form 2·Σ_{k>r} σ_k; they differ in the energy they multiply.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

try:
    from ..balancing.balanced_truncation import ReducedModel, hat_sigma, tail_coefficient
    from ..core.config import SimulationConfig
    from ..core.errors import InputError, NonConvergenceError, UnsupportedError
    from ..core.linalg import lambda_max, unvech, vech
    from ..core.operators import mean_square_stability, symmetric_matricization
    from ..core.system import StochasticSystem
    from ..simulate.moments import midpoint_propagators
    from ..solvers.lyapunov import solve_generalized_lyapunov
except ImportError:
    from balancing.balanced_truncation import ReducedModel, hat_sigma, tail_coefficient
    from core.config import SimulationConfig
    from core.errors import InputError, NonConvergenceError, UnsupportedError
    from core.linalg import lambda_max, unvech, vech
    from core.operators import mean_square_stability, symmetric_matricization
    from core.system import StochasticSystem
    from simulate.moments import midpoint_propagators
    from solvers.lyapunov import solve_generalized_lyapunov

logger = logging.getLogger(__name__)

GAMMA_METHODS = ("worst_case", "operator_norm")


# =============================================================================
# DATA
# =============================================================================

@dataclass
class BoundContext:
    """
    Energy entering the a-priori bound.

    Finite horizon: J_T(0, u) = ‖(u, y)‖²_{L²_T} and the terminal term
    E[x(T)ᵀQx(T)]. Infinite horizon: the pair norm ‖(u, y)‖_{L²}.
    """
    T: float = math.inf
    cost: float = 0.0
    terminal: float = 0.0
    pair_norm: float = 0.0

    def __post_init__(self):
        if min(self.cost, self.terminal, self.pair_norm) < 0:
            raise InputError("Energies in a bound context must be non-negative")
        if not self.T > 0:
            raise InputError(f"Horizon must be positive, got {self.T}")

    @classmethod
    def finite(cls, T: float, cost: float, terminal: float = 0.0) -> "BoundContext":
        return cls(T=T, cost=cost, terminal=terminal)

    @classmethod
    def infinite(cls, pair_norm: float) -> "BoundContext":
        return cls(pair_norm=pair_norm)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.T)

    @property
    def energy_norm(self) -> float:
        if self.is_finite:
            return math.sqrt(self.cost + self.terminal)
        return self.pair_norm


@dataclass
class ErrorBoundReport:
    r: int
    tail_coefficient: float
    hat_sigma: list[float]
    plain_tail: float
    beta: float
    b: float
    b_r: float
    gamma_T: float | None = None
    gamma_method: str = "worst_case"
    gamma_dt: float | None = None
    T: float = math.inf
    bounds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "tail_coefficient": self.tail_coefficient,
            "hat_sigma": self.hat_sigma,
            "plain_tail": self.plain_tail,
            "beta": self.beta,
            "b": self.b,
            "b_r": self.b_r,
            "gamma_T": self.gamma_T,
            "gamma_method": self.gamma_method,
            "gamma_dt": self.gamma_dt,
            "T": self.T if math.isfinite(self.T) else "inf",
            "bounds": dict(self.bounds),
        }


# =============================================================================
# CONSTANTS
# =============================================================================

def _check_order(sigma, r: int) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 1 or sigma.size == 0 or np.any(sigma < 0):
        raise InputError("sigma must be a non-empty vector of non-negative values")
    if not 1 <= r <= sigma.size:
        raise InputError(f"Order r={r} outside 1..{sigma.size}")
    return sigma


def plain_tail(sigma, r: int) -> float:
    """2·Σ_{k>r} σ_k."""
    sigma = _check_order(sigma, r)
    return float(2.0 * np.sum(sigma[r:]))


def b_constant(sys: StochasticSystem, Q: np.ndarray) -> float:
    """‖BᵀQ^{1/2}‖₂² = λ_max(BᵀQB)."""
    if sys.m == 0:
        return 0.0
    return max(lambda_max(sys.B.T @ Q @ sys.B), 0.0)


def c_constant(sys: StochasticSystem, P: np.ndarray) -> float:
    """‖CP^{1/2}‖₂² = λ_max(CPCᵀ)."""
    if sys.p == 0:
        return 0.0
    return max(lambda_max(sys.C @ P @ sys.C.T), 0.0)


def beta_constant(sys: StochasticSystem, P: np.ndarray, Q: np.ndarray) -> float:
    return max(b_constant(sys, Q), c_constant(sys, P))


def b_r_constant(reduced: ReducedModel) -> float:
    """‖B_rᵀΣ_r^{1/2}‖₂²."""
    return b_constant(reduced.system, reduced.Sigma_r)


# =============================================================================
# BOUNDS
# =============================================================================

def apriori_bound(sigma, r: int, context: BoundContext) -> float:
    """
    tail_coefficient·(J_T + E[x(T)ᵀQx(T)])^{1/2} on a finite horizon,
    tail_coefficient·‖(u, y)‖_{L²} on [0, ∞).
    """
    sigma = _check_order(sigma, r)
    return tail_coefficient(sigma, r) * context.energy_norm


def feedback_bound(sigma, r: int, norm_u1: float) -> float:
    """Bound on ‖(u − u_r, y − y_r)‖ for u = −BᵀQx + u¹: tail_coefficient·‖u¹‖."""
    sigma = _check_order(sigma, r)
    if norm_u1 < 0:
        raise InputError(f"norm_u1 must be non-negative, got {norm_u1}")
    return tail_coefficient(sigma, r) * norm_u1


def open_loop_bound(sigma, r: int, gamma_T: float, context: BoundContext) -> float:
    """(1 + γ_T)·apriori_bound for the output error under the common input u."""
    if gamma_T < 0:
        raise InputError(f"gamma_T must be non-negative, got {gamma_T}")
    return (1.0 + gamma_T) * apriori_bound(sigma, r, context)


def weighted_bound(sigma, r: int, beta: float, weighted_input_norm: float) -> float:
    """
    2·(Σ_{k>r} σ_k)·‖e^{−β·/2}u‖, bounding ‖e^{−β·/2}(y − y_r)‖.

    The caller applies the weight e^{−βt} inside both squared norms; beta is
    validated here only.
    """
    if beta < 0 or weighted_input_norm < 0:
        raise InputError("beta and the weighted input norm must be non-negative")
    return plain_tail(sigma, r) * weighted_input_norm


# =============================================================================
# INPUT-OUTPUT NORM OF THE REDUCED MODEL
# =============================================================================

def _zoh(A: np.ndarray, B: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Φ = e^{Ah} and Γ = ∫₀ʰ e^{As} ds B."""
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = linalg.expm(M * h)
    return E[:n, :n], E[:n, n:]


def _observability_flow(sys: StochasticSystem, steps: int, h: float, stationary: bool) -> np.ndarray:
    """
    Z at the grid points for −Ż = AᵀZ + ZA + Π_N(Z) + CᵀC, Z(T) = 0,
    or the constant generalized Lyapunov solution on [0, ∞).
    """
    n = sys.n
    CtC = sys.C.T @ sys.C
    if stationary:
        Z = solve_generalized_lyapunov(sys, CtC)
        return np.broadcast_to(Z, (steps + 1, n, n))
    R, S = midpoint_propagators(symmetric_matricization(sys), h)
    g = S @ vech(CtC)
    Z = np.zeros((steps + 1, n, n))
    z = np.zeros(g.size)
    for k in range(steps - 1, -1, -1):
        z = R @ z + g
        Z[k] = unvech(z, n)
    return Z


def _operator_norm(reduced: ReducedModel, T: float, cfg: SimulationConfig) -> tuple[float, float]:
    sys = reduced.system
    stationary = not math.isfinite(T)
    if stationary:
        if not mean_square_stability(sys).stable:
            raise UnsupportedError("The input-output norm on [0, ∞) needs a mean-square stable reduced model")
        horizon = cfg.T
    else:
        horizon = T
    h = cfg.dt
    steps = max(int(round(horizon / h)), 1)
    r, m = sys.n, sys.m
    Phi, Gamma = _zoh(sys.A, sys.B, h)
    Z = _observability_flow(sys, steps, h, stationary)
    ZB = 0.5 * (Z[:-1] + Z[1:]) @ sys.B            # (steps, r, m)

    def mean_path(u: np.ndarray) -> np.ndarray:
        m_k = np.zeros((steps + 1, r))
        for k in range(steps):
            m_k[k + 1] = Phi @ m_k[k] + Gamma @ u[k]
        return 0.5 * (m_k[:-1] + m_k[1:])

    def mean_path_adjoint(c: np.ndarray) -> np.ndarray:
        d = np.zeros((steps + 1, r))
        d[:-1] += 0.5 * c
        d[1:] += 0.5 * c
        out = np.zeros((steps, m))
        lam = d[steps]
        for k in range(steps - 1, -1, -1):
            out[k] = Gamma.T @ lam
            lam = d[k] + Phi.T @ lam
        return out

    # ‖y‖² = 2h Σ_k m̄_kᵀ Z̄_k B u_k, a quadratic form in u
    def matvec(v: np.ndarray) -> np.ndarray:
        u = v.reshape(steps, m)
        Eu = np.einsum("kij,kj->ki", ZB, u)
        LtEu = mean_path_adjoint(Eu)
        EtLu = np.einsum("kij,ki->kj", ZB, mean_path(u))
        return (LtEu + EtLu).ravel()

    size = steps * m
    if size == 0:
        return 0.0, h
    if size <= 32:
        S = np.column_stack([matvec(e) for e in np.eye(size)])
        value = linalg.eigvalsh(0.5 * (S + S.T))[-1]
    else:
        op = LinearOperator((size, size), matvec=matvec, dtype=float)
        try:
            value = eigsh(op, k=1, which="LA", v0=np.ones(size), maxiter=10 * cfg.power_iterations,
                          return_eigenvectors=False)[0]
        except ArpackNoConvergence as e:
            raise NonConvergenceError(f"Input-output norm iteration did not converge: {e}")
    return math.sqrt(max(float(value), 0.0)), h


def gamma_T(
    reduced: ReducedModel,
    T: float,
    method: str = "worst_case",
    sim_cfg: SimulationConfig | None = None,
) -> float:
    """
    Constant γ_T with ‖y_r(·, 0, u)‖ ≤ γ_T‖u‖ on [0, T].

    worst_case returns e^{b_r T}; operator_norm estimates the input-output
    norm of the reduced model on sim_cfg's grid (T = inf uses the stationary
    observability Gramian and truncates inputs at sim_cfg.T).
    """
    return gamma_T_estimate(reduced, T, method, sim_cfg)[0]


def gamma_T_estimate(
    reduced: ReducedModel,
    T: float,
    method: str = "worst_case",
    sim_cfg: SimulationConfig | None = None,
) -> tuple[float, float | None]:
    """(γ_T, grid step used); the step is None for the worst-case value."""
    if method not in GAMMA_METHODS:
        raise InputError(f"Unknown gamma_T method: {method}. Available: {list(GAMMA_METHODS)}")
    if not T > 0:
        raise InputError(f"Horizon must be positive, got {T}")
    if method == "worst_case":
        if not math.isfinite(T):
            raise UnsupportedError("The worst-case gamma_T needs a finite horizon")
        return math.exp(b_r_constant(reduced) * T), None
    value, h = _operator_norm(reduced, T, sim_cfg or SimulationConfig())
    logger.info("gamma_T (operator norm, T=%s, dt=%g): %.6e", T, h, value)
    return value, h


# =============================================================================
# REPORT
# =============================================================================

def error_bound_report(
    sys: StochasticSystem,
    P: np.ndarray,
    Q: np.ndarray,
    sigma,
    reduced: ReducedModel,
    T: float = math.inf,
    gamma_method: str = "worst_case",
    sim_cfg: SimulationConfig | None = None,
) -> ErrorBoundReport:
    """Constants of every bound for the truncation to order reduced.r."""
    sigma = _check_order(sigma, reduced.r)
    r = reduced.r
    gamma, dt = None, None
    if math.isfinite(T) or gamma_method == "operator_norm":
        try:
            gamma, dt = gamma_T_estimate(reduced, T, gamma_method, sim_cfg)
        except UnsupportedError as e:
            logger.warning("gamma_T not available: %s", e)
    return ErrorBoundReport(
        r=r,
        tail_coefficient=tail_coefficient(sigma, r),
        hat_sigma=hat_sigma(sigma).tolist(),
        plain_tail=plain_tail(sigma, r),
        beta=beta_constant(sys, P, Q),
        b=b_constant(sys, Q),
        b_r=b_r_constant(reduced),
        gamma_T=gamma,
        gamma_method=gamma_method,
        gamma_dt=dt,
        T=T,
    )
