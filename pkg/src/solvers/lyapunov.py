"""
Lyapunov solvers: the standard equation AᵀX + XA + W = 0 by Bartels–Stewart
and the generalized equation AᵀX + XA + Π_N(X) + W = 0 by fixed-point
iteration with a dense direct fallback.
"""

import logging

import numpy as np
from scipy import linalg

try:
    from ..core.errors import InputError, NonConvergenceError, NumericalError, PreconditionError
    from ..core.linalg import symmetrize, vech, unvech
    from ..core.operators import apply_operator, mean_square_stability, noise_term, symmetric_matricization
    from ..core.system import StochasticSystem
except ImportError:
    from core.errors import InputError, NonConvergenceError, NumericalError, PreconditionError
    from core.linalg import symmetrize, vech, unvech
    from core.operators import apply_operator, mean_square_stability, noise_term, symmetric_matricization
    from core.system import StochasticSystem

logger = logging.getLogger(__name__)

# Relative backward error beyond which a Bartels–Stewart solution is rejected
LYAPUNOV_ACCEPT = 1e-8


def _relative_residual(A: np.ndarray, X: np.ndarray, W: np.ndarray) -> float:
    R = A.T @ X + X @ A + W
    scale = 2 * np.linalg.norm(A) * np.linalg.norm(X) + np.linalg.norm(W)
    return float(np.linalg.norm(R) / scale) if scale > 0 else 0.0


def _closest_pair(A: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalue pair (λ_i, λ_j) minimizing |λ_i + λ_j|."""
    lam = linalg.eigvals(A)
    sums = np.abs(lam[:, None] + lam[None, :])
    i, j = np.unravel_index(np.argmin(sums), sums.shape)
    return complex(lam[i]), complex(lam[j])


def solve_lyapunov(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """
    Solve AᵀX + XA + W = 0 via real Schur reduction (Bartels–Stewart).

    Args:
        A: n×n matrix with λ_i + λ_j ≠ 0 for all eigenvalue pairs
        W: symmetric n×n right-hand side

    Returns:
        Symmetric solution X

    Raises:
        NumericalError: near-singular Sylvester spectrum, reported with the offending pair
    """
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or W.shape != A.shape:
        raise InputError(f"Shapes of A {A.shape} and W {W.shape} do not match")

    lam_i, lam_j = _closest_pair(A)
    separation = abs(lam_i + lam_j)
    if separation <= 1e-13 * max(1.0, np.linalg.norm(A, 1)):
        raise NumericalError(
            f"Lyapunov operator is singular: eigenvalues {lam_i:.6g} and {lam_j:.6g} sum to {separation:.3e}"
        )

    try:
        # scipy solves aX + Xaᴴ = q
        X = linalg.solve_continuous_lyapunov(A.T, -W)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Bartels-Stewart solve failed near eigenvalues {lam_i:.6g}, {lam_j:.6g}: {e}")
    X = symmetrize(X)

    residual = _relative_residual(A, X, W)
    if not np.isfinite(residual) or residual > LYAPUNOV_ACCEPT:
        raise NumericalError(
            f"Lyapunov residual {residual:.3e} too large; closest eigenvalue pair {lam_i:.6g}, {lam_j:.6g}"
        )
    return X


def generalized_residual(sys: StochasticSystem, X: np.ndarray, W: np.ndarray, adjoint: bool = False) -> float:
    """Frobenius norm of (L_A + Π_N)(X) + W."""
    return float(np.linalg.norm(apply_operator(sys, X, adjoint) + W))


def _direct_solve(sys: StochasticSystem, W: np.ndarray, adjoint: bool, max_dim: int) -> np.ndarray:
    """Dense solve of the half-vectorized n(n+1)/2 system with one refinement step."""
    n = sys.n
    Ms = symmetric_matricization(sys, adjoint=adjoint, max_dim=max_dim)
    rhs = -vech(W)
    try:
        lu = linalg.lu_factor(Ms)
        z = linalg.lu_solve(lu, rhs)
        z = z + linalg.lu_solve(lu, rhs - Ms @ z)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Direct generalized Lyapunov solve failed: {e}")
    return unvech(z, n)


def solve_generalized_lyapunov(
    sys: StochasticSystem,
    W: np.ndarray,
    cfg=None,
    adjoint: bool = False,
    check_stability: bool = True,
) -> np.ndarray:
    """
    Solve AᵀX + XA + Π_N(X) + W = 0 (or the adjoint equation).

    Fixed point X_{k+1} = solve_lyapunov(A, Π_N(X_k) + W) from X_0 = 0.
    When the iteration stalls or runs out of budget, falls back to a dense
    direct solve of the matricized equation.
    """
    tol = cfg.tol if cfg is not None else 1e-10
    max_outer = cfg.max_outer if cfg is not None else 200
    max_dim = cfg.max_dim if cfg is not None else 150

    W = symmetrize(np.asarray(W, dtype=float))
    if W.shape != (sys.n, sys.n):
        raise InputError(f"W has shape {W.shape}, system dimension is {sys.n}")

    if check_stability:
        certificate = mean_square_stability(sys, max_dim=max_dim)
        if not certificate.stable:
            raise PreconditionError(
                f"(A, N) is not mean-square stable (spectral abscissa {certificate.abscissa:.3e})"
            )

    w_norm = np.linalg.norm(W)
    if w_norm == 0.0:
        return np.zeros_like(W)

    A = sys.A.T if adjoint else sys.A
    X = np.zeros_like(W)
    previous_step = np.inf
    converged = False
    if sys.q > 0 and np.any(sys.K):
        for k in range(max_outer):
            X_next = solve_lyapunov(A, noise_term(sys.N, sys.K, X, adjoint) + W)
            step = np.linalg.norm(X_next - X)
            X = X_next
            if step <= tol * np.linalg.norm(X):
                converged = True
                logger.debug("Generalized Lyapunov fixed point converged in %d iterations", k + 1)
                break
            # contraction factor close to one: the iteration would take too long
            if k >= 10 and step > 0.95 * previous_step:
                logger.debug("Generalized Lyapunov fixed point stalls (ratio %.3f)", step / previous_step)
                break
            previous_step = step
    else:
        X = solve_lyapunov(A, W)
        converged = True

    if not converged or generalized_residual(sys, X, W, adjoint) > tol * w_norm:
        logger.debug("Falling back to the direct generalized Lyapunov solve")
        X = _direct_solve(sys, W, adjoint, max_dim)

    residual = generalized_residual(sys, X, W, adjoint)
    scale = w_norm + 2 * np.linalg.norm(sys.A) * np.linalg.norm(X)
    if residual > max(tol * w_norm, 1e-12 * scale):
        raise NonConvergenceError(
            f"Generalized Lyapunov residual {residual:.3e} exceeds tolerance", last_residual=residual
        )
    return symmetrize(X)
