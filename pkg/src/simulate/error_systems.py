"""
Error systems comparing a full model with its reduced model, and the closed
loops built from the LQG feedbacks.
"""

import numpy as np
from scipy import linalg

try:
    from ..balancing.balanced_truncation import ReducedModel
    from ..core.errors import InputError, PreconditionError
    from ..core.system import StochasticSystem
except ImportError:
    from balancing.balanced_truncation import ReducedModel
    from core.errors import InputError, PreconditionError
    from core.system import StochasticSystem


ERROR_MODES = ("open_loop", "closed_loop")


def _check_compatible(sys: StochasticSystem, reduced: ReducedModel) -> None:
    red = reduced.system
    if red.m != sys.m or red.p != sys.p:
        raise InputError(
            f"Reduced model has {red.m} inputs and {red.p} outputs, full model {sys.m} and {sys.p}"
        )
    if red.q != sys.q or not np.allclose(red.K, sys.K):
        raise InputError("Full and reduced model must share the same Wiener process")
    if reduced.V.shape[0] != sys.n:
        raise InputError(f"Reduced model was built for state dimension {reduced.V.shape[0]}, not {sys.n}")


def lqg_feedback_gain(sys: StochasticSystem, Q: np.ndarray) -> np.ndarray:
    """F = −BᵀQ, the optimal feedback of the stochastic LQ problem."""
    return -sys.B.T @ Q


def reduced_feedback_gain(reduced: ReducedModel) -> np.ndarray:
    """−B_rᵀΣ_r W_r, the reduced controller acting on the full state."""
    return -reduced.B_r.T @ reduced.Sigma_r @ reduced.W


def build_error_system(
    sys: StochasticSystem,
    reduced: ReducedModel,
    mode: str = "open_loop",
    Q: np.ndarray | None = None,
    include_control_error: bool = False,
) -> StochasticSystem:
    """
    Stack full and reduced model so that the output is y − y_r.

    Args:
        sys: full model (balanced or original coordinates)
        reduced: truncated balanced model
        mode: "open_loop" or "closed_loop" (each block closed by its LQG feedback)
        Q: observability Gramian of ``sys``, required for "closed_loop"
        include_control_error: closed loop only, prepend the rows of u − u_r

    Returns:
        StochasticSystem of dimension n + r driven by the common input
    """
    if mode not in ERROR_MODES:
        raise InputError(f"Unknown error-system mode: {mode}. Available: {list(ERROR_MODES)}")
    _check_compatible(sys, reduced)
    red = reduced.system

    if mode == "open_loop":
        if include_control_error:
            raise InputError("Control-error rows exist only for the closed-loop error system")
        A_full, A_red = sys.A, red.A
    else:
        if Q is None:
            raise PreconditionError("No observability Gramian available. Run compute_gramians first.")
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (sys.n, sys.n):
            raise InputError(f"Q must be {sys.n}x{sys.n}, got {Q.shape}")
        A_full = sys.A + sys.B @ lqg_feedback_gain(sys, Q)
        A_red = red.A - red.B @ red.B.T @ reduced.Sigma_r

    C = np.hstack([sys.C, -red.C])
    if include_control_error:
        control_rows = np.hstack([-sys.B.T @ Q, red.B.T @ reduced.Sigma_r])
        C = np.vstack([control_rows, C])

    return StochasticSystem(
        A=linalg.block_diag(A_full, A_red),
        N=[linalg.block_diag(Ni, Nri) for Ni, Nri in zip(sys.N, red.N)],
        B=np.vstack([sys.B, red.B]),
        C=C,
        K=sys.K,
        metadata={"error_system": mode, "n": sys.n, "r": reduced.r},
    )


def reduced_feedback_on_full(sys: StochasticSystem, reduced: ReducedModel) -> StochasticSystem:
    """Full model closed by the reduced controller u = −B_rᵀΣ_r W_r x."""
    _check_compatible(sys, reduced)
    return sys.replace(
        A=sys.A + sys.B @ reduced_feedback_gain(reduced),
        metadata={**sys.metadata, "feedback": f"reduced r={reduced.r}"},
    )


def driving_variable_system(sys: StochasticSystem, Q: np.ndarray) -> StochasticSystem:
    """
    Closed loop under u = −BᵀQx + v with output (−BᵀQx, y).

    For v = 0 the output is the pair (u_F, y) of the optimal feedback
    u_F = −BᵀQx, so its output energy is the cost J(x₀, u_F).
    """
    Q = np.asarray(Q, dtype=float)
    F = lqg_feedback_gain(sys, Q)
    return StochasticSystem(
        A=sys.A + sys.B @ F,
        N=sys.N,
        B=sys.B,
        C=np.vstack([F, sys.C]),
        K=sys.K,
        metadata={**sys.metadata, "parameterization": "driving_variable"},
    )
