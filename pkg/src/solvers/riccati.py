"""
Riccati solver: stabilizing solution of AᵀX + XA + W − XBBᵀX = 0.
"""

import logging

import numpy as np
from scipy import linalg

try:
    from ..core.errors import InputError, NumericalError
    from ..core.linalg import symmetrize
    from .lyapunov import solve_lyapunov
except ImportError:
    from core.errors import InputError, NumericalError
    from core.linalg import symmetrize
    from solvers.lyapunov import solve_lyapunov

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


def riccati_residual(A: np.ndarray, B: np.ndarray, W: np.ndarray, X: np.ndarray) -> float:
    return float(np.linalg.norm(A.T @ X + X @ A + W - X @ B @ B.T @ X))


def _is_hurwitz(M: np.ndarray) -> bool:
    return bool(np.all(linalg.eigvals(M).real < 0))


def solve_riccati(A: np.ndarray, B: np.ndarray, W: np.ndarray, newton_steps: int = 1) -> np.ndarray:
    """
    Stabilizing solution of the continuous-time algebraic Riccati equation.

    The ordered Schur method on the Hamiltonian pencil (scipy's CARE
    solver) is followed by Newton refinement steps, each a Lyapunov solve
    for the current closed loop. A step is kept only if it lowers the
    residual.

    Args:
        A: n×n drift
        B: n×m input matrix (may have zero columns)
        W: symmetric PSD n×n state weight

    Returns:
        X ⪰ 0 with A − BBᵀX Hurwitz

    Raises:
        NumericalError: no stabilizing invariant subspace, or the residual
            stays above RESIDUAL_TOL·max(‖W‖, 1) after refinement
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    W = symmetrize(np.asarray(W, dtype=float))
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n or W.shape != (n, n):
        raise InputError(f"Incompatible shapes A {A.shape}, B {B.shape}, W {W.shape}")

    if B.shape[1] == 0 or not np.any(B):
        # no control authority: the quadratic term vanishes
        if not _is_hurwitz(A):
            raise NumericalError("Stabilizing Riccati solution does not exist: B = 0 and A is not Hurwitz")
        return solve_lyapunov(A, W)

    try:
        X = linalg.solve_continuous_are(A, B, W, np.eye(B.shape[1]))
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Stabilizing invariant subspace not found: {e}")
    X = symmetrize(X)

    residual = riccati_residual(A, B, W, X)
    for _ in range(newton_steps):
        A_closed = A - B @ (B.T @ X)
        G = X @ B
        try:
            X_new = solve_lyapunov(A_closed, W + G @ G.T)
        except NumericalError:
            break
        new_residual = riccati_residual(A, B, W, X_new)
        if not new_residual < residual:
            break
        X, residual = X_new, new_residual

    if not _is_hurwitz(A - B @ (B.T @ X)):
        raise NumericalError("Riccati solution is not stabilizing (A - BBᵀX not Hurwitz)")
    scale = max(np.linalg.norm(W), 1.0)
    if residual > RESIDUAL_TOL * scale:
        raise NumericalError(
            f"Riccati residual {residual:.3e} above {RESIDUAL_TOL:.0e}·max(‖W‖, 1) = {RESIDUAL_TOL * scale:.3e}"
        )
    logger.debug("Riccati residual %.3e", residual)
    return X
