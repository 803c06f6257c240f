"""
Gramian pair of LQG balancing for stochastic systems.

Q is the stabilizing solution of the stochastic LQ Riccati equation

    AᵀQ + QA + Π_N(Q) + CᵀC − QBBᵀQ = 0,

P is any positive definite solution of the Riccati-type inequality

    AᵀP⁻¹ + P⁻¹A + Π_N(P⁻¹) − CᵀC + P⁻¹BBᵀP⁻¹ ≤ 0.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

try:
    from ..core.config import SolverConfig
    from ..core.errors import CertificateError, NonConvergenceError, NumericalError, PreconditionError
    from ..core.linalg import lambda_max, symmetrize
    from ..core.operators import SpectralCertificate, apply_operator, mean_square_stability, noise_term
    from ..core.system import StochasticSystem
    from .lyapunov import solve_generalized_lyapunov
    from .riccati import solve_riccati
except ImportError:
    from core.config import SolverConfig
    from core.errors import CertificateError, NonConvergenceError, NumericalError, PreconditionError
    from core.linalg import lambda_max, symmetrize
    from core.operators import SpectralCertificate, apply_operator, mean_square_stability, noise_term
    from core.system import StochasticSystem
    from solvers.lyapunov import solve_generalized_lyapunov
    from solvers.riccati import solve_riccati

logger = logging.getLogger(__name__)

# Consecutive residual increases tolerated before the Q iteration is declared divergent
DIVERGENCE_WINDOW = 5


@dataclass
class ObservabilityDiagnostics:
    iterations: int
    residual: float
    newton_steps: int
    closed_loop_certificate: SpectralCertificate
    history: list[float] = field(default_factory=list)


@dataclass
class GramianPair:
    """Observability Gramian Q, reachability Gramian P and solver diagnostics."""
    P: np.ndarray
    Q: np.ndarray
    q_residual: float
    p_margin: float
    iterations: int
    closed_loop_certificate: SpectralCertificate
    strategy: str = "subgradient_feasibility"
    p_iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "q_residual": self.q_residual,
            "p_margin": self.p_margin,
            "iterations": self.iterations,
            "p_iterations": self.p_iterations,
            "strategy": self.strategy,
            "closed_loop_certificate": self.closed_loop_certificate.to_dict(),
            "lambda_min_P": float(np.linalg.eigvalsh(self.P)[0]),
            "lambda_min_Q": float(np.linalg.eigvalsh(self.Q)[0]),
        }


def riccati_residual(sys: StochasticSystem, Q: np.ndarray) -> np.ndarray:
    """Left side of the stochastic LQ Riccati equation at Q."""
    BtQ = sys.B.T @ Q
    return symmetrize(apply_operator(sys, Q) + sys.C.T @ sys.C - BtQ.T @ BtQ)


def reachability_margin(sys: StochasticSystem, P: np.ndarray) -> float:
    """λ_max of the Riccati-type inequality at P (feasible iff ≤ 0)."""
    X = np.linalg.inv(P)
    return lambda_max(lmi_quadratic_form(sys, symmetrize(X)))


def lmi_quadratic_form(sys: StochasticSystem, X: np.ndarray) -> np.ndarray:
    """AᵀX + XA + Π_N(X) − CᵀC + XBBᵀX."""
    XB = X @ sys.B
    return symmetrize(apply_operator(sys, X) - sys.C.T @ sys.C + XB @ XB.T)


def _newton_polish(sys: StochasticSystem, Q: np.ndarray, target: float, steps: int, cfg: SolverConfig) -> tuple[np.ndarray, int]:
    """Newton–Kleinman steps on the stochastic Riccati equation while they help."""
    residual = np.linalg.norm(riccati_residual(sys, Q))
    taken = 0
    for _ in range(steps):
        if residual <= target:
            break
        BtQ = sys.B.T @ Q
        closed = sys.replace(A=sys.A - sys.B @ BtQ)
        try:
            Q_new = solve_generalized_lyapunov(closed, sys.C.T @ sys.C + BtQ.T @ BtQ, cfg)
        except (NonConvergenceError, NumericalError, PreconditionError) as e:
            logger.debug("Newton polish stopped: %s", e)
            break
        new_residual = np.linalg.norm(riccati_residual(sys, Q_new))
        if not new_residual < residual:
            break
        Q, residual = Q_new, new_residual
        taken += 1
    return Q, taken


def solve_observability_gramian(sys: StochasticSystem, cfg: SolverConfig | None = None) -> tuple[np.ndarray, ObservabilityDiagnostics]:
    """
    Stabilizing solution Q of the stochastic LQ Riccati equation.

    Fixed point Q_{k+1} = solve_riccati(A, B, CᵀC + Π_N(Q_k)), Q_0 = I,
    stopped on relative change ≤ tol, followed by Newton polishing.

    Raises:
        NonConvergenceError: residual grew over DIVERGENCE_WINDOW consecutive
            iterations, or the tolerance was not met within max_outer
        CertificateError: the closed loop (A − BBᵀQ, N) is not mean-square stable
    """
    cfg = cfg or SolverConfig()
    n = sys.n
    CtC = sys.C.T @ sys.C
    ctc_norm = np.linalg.norm(CtC)

    if ctc_norm == 0.0:
        # zero output: detectability forces stability and Q = 0
        certificate = mean_square_stability(sys, max_dim=cfg.max_dim)
        if not certificate.stable:
            raise PreconditionError("C = 0 and (A, N) is unstable: the system is not detectable")
        return np.zeros((n, n)), ObservabilityDiagnostics(0, 0.0, 0, certificate)

    target = 10 * cfg.tol * ctc_norm
    Q = np.eye(n)
    history: list[float] = []
    growth = 0
    converged = False
    iterations = 0
    for k in range(cfg.max_outer):
        iterations = k + 1
        Q_next = solve_riccati(sys.A, sys.B, CtC + noise_term(sys.N, sys.K, Q))
        change = np.linalg.norm(Q_next - Q)
        reference = np.linalg.norm(Q)
        Q = Q_next
        residual = float(np.linalg.norm(riccati_residual(sys, Q)))
        logger.debug("Q iteration %d: change %.3e, residual %.3e", iterations, change, residual)

        if history and residual > history[-1]:
            growth += 1
            if growth >= DIVERGENCE_WINDOW:
                raise NonConvergenceError(
                    f"Observability Gramian iteration diverges (residual {residual:.3e} after {iterations} iterations)",
                    last_residual=residual,
                )
        else:
            growth = 0
        history.append(residual)

        if change <= cfg.tol * reference or residual <= 0.1 * target:
            converged = True
            break

    Q, newton = _newton_polish(sys, Q, target, cfg.newton_steps, cfg)
    residual = float(np.linalg.norm(riccati_residual(sys, Q)))
    if residual > target:
        state = "converged" if converged else "stopped"
        raise NonConvergenceError(
            f"Observability Gramian iteration {state} with residual {residual:.3e} > {target:.3e}",
            last_residual=residual,
        )

    certificate = mean_square_stability(sys.replace(A=sys.A - sys.B @ (sys.B.T @ Q)), max_dim=cfg.max_dim)
    if not certificate.stable:
        raise CertificateError(
            f"Q is not stabilizing: closed-loop spectral abscissa {certificate.abscissa:.3e}"
        )

    logger.info("Observability Gramian: %d iterations, %d Newton steps, residual %.3e", iterations, newton, residual)
    return symmetrize(Q), ObservabilityDiagnostics(iterations, residual, newton, certificate, history)


def compute_gramians(sys: StochasticSystem, cfg: SolverConfig | None = None, strategy: str = "subgradient_feasibility") -> GramianPair:
    """Solve for Q, then for a feasible P with the named strategy."""
    try:
        from .reachability import solve_reachability_gramian
    except ImportError:
        from solvers.reachability import solve_reachability_gramian

    cfg = cfg or SolverConfig()
    Q, q_diag = solve_observability_gramian(sys, cfg)
    P, p_diag = solve_reachability_gramian(sys, cfg, strategy)
    return GramianPair(
        P=P,
        Q=Q,
        q_residual=q_diag.residual,
        p_margin=p_diag.margin,
        iterations=q_diag.iterations,
        closed_loop_certificate=q_diag.closed_loop_certificate,
        strategy=p_diag.strategy,
        p_iterations=p_diag.iterations,
    )
