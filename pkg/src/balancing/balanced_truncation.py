"""
Square-root balancing of the Gramian pair and truncation of the balanced
realization.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

try:
    from ..core.errors import InputError, OrderSelectionError, PreconditionError
    from ..core.linalg import ordered_eigh, symmetrize
    from ..core.system import StochasticSystem
except ImportError:
    from core.errors import InputError, OrderSelectionError, PreconditionError
    from core.linalg import ordered_eigh, symmetrize
    from core.system import StochasticSystem

logger = logging.getLogger(__name__)

DEFINITENESS_TOL = 1e-12
SINGULAR_VALUE_FLOOR = 1e-14


@dataclass
class BalancedRealization:
    """Balancing transformation, singular values and balanced system."""
    S_b: np.ndarray
    S_b_inv: np.ndarray
    sigma: np.ndarray
    system: StochasticSystem

    @property
    def A_n(self) -> np.ndarray:
        return self.system.A

    @property
    def B_n(self) -> np.ndarray:
        return self.system.B

    @property
    def C_n(self) -> np.ndarray:
        return self.system.C

    @property
    def N_n(self) -> list[np.ndarray]:
        return self.system.N

    @property
    def n(self) -> int:
        return self.sigma.size


@dataclass
class ReducedModel:
    """Truncated balanced system with its Petrov–Galerkin maps."""
    system: StochasticSystem
    sigma_r: np.ndarray
    V: np.ndarray  # lift, n×r
    W: np.ndarray  # restrict, r×n
    r: int

    @property
    def A_r(self) -> np.ndarray:
        return self.system.A

    @property
    def B_r(self) -> np.ndarray:
        return self.system.B

    @property
    def C_r(self) -> np.ndarray:
        return self.system.C

    @property
    def N_r(self) -> list[np.ndarray]:
        return self.system.N

    @property
    def Sigma_r(self) -> np.ndarray:
        return np.diag(self.sigma_r)


@dataclass
class OrderChoice:
    r: int
    warning: str | None = None


def _check_definite(M: np.ndarray, name: str, error_cls) -> None:
    w = linalg.eigvalsh(symmetrize(M))
    if w[-1] <= 0 or w[0] <= DEFINITENESS_TOL * w[-1]:
        raise error_cls(f"{name} is not positive definite (λ_min {w[0]:.3e}, λ_max {w[-1]:.3e})")


def balance(sys: StochasticSystem, P: np.ndarray, Q: np.ndarray) -> BalancedRealization:
    """
    Balance (P, Q): L = chol(P), LᵀQL = U Σ² Uᵀ,
    S_b = Σ^{1/2} Uᵀ L⁻¹ and S_b⁻¹ = L U Σ^{−1/2}.
    """
    n = sys.n
    P = symmetrize(np.asarray(P, dtype=float))
    Q = symmetrize(np.asarray(Q, dtype=float))
    if P.shape != (n, n) or Q.shape != (n, n):
        raise InputError(f"Gramians must be {n}x{n}, got {P.shape} and {Q.shape}")
    _check_definite(P, "P", InputError)
    _check_definite(Q, "Q", PreconditionError)

    L = linalg.cholesky(P, lower=True)
    eigenvalues, U = ordered_eigh(L.T @ Q @ L)
    sigma = np.sqrt(np.maximum(eigenvalues, 0.0))
    if sigma[-1] < SINGULAR_VALUE_FLOOR * sigma[0]:
        raise PreconditionError(
            f"Singular value {sigma[-1]:.3e} below {SINGULAR_VALUE_FLOOR:g}·σ₁: observability assumption violated"
        )

    root = np.sqrt(sigma)
    L_inv = linalg.solve_triangular(L, np.eye(n), lower=True)
    S_b = (U.T @ L_inv) * root[:, None]
    S_b_inv = (L @ U) / root[None, :]
    logger.info("Balanced n=%d: σ₁=%.6e, σ_n=%.6e", n, sigma[0], sigma[-1])
    return BalancedRealization(S_b=S_b, S_b_inv=S_b_inv, sigma=sigma, system=sys.transformed(S_b, S_b_inv))


def gap_holds(sigma: np.ndarray, r: int, gap_tol: float = 1e-10) -> bool:
    if r >= sigma.size:
        return True
    return bool(sigma[r - 1] - sigma[r] > gap_tol * sigma[0])


def _nearest_admissible(sigma: np.ndarray, r: int, gap_tol: float) -> int:
    n = sigma.size
    for distance in range(1, n):
        for candidate in (r - distance, r + distance):
            if 1 <= candidate <= n and gap_holds(sigma, candidate, gap_tol):
                return candidate
    return n


def truncate(bal: BalancedRealization, r: int, gap_tol: float = 1e-10) -> ReducedModel:
    """Keep the first r balanced states; r = n is the identity truncation."""
    n = bal.n
    if not 1 <= r <= n:
        raise InputError(f"Order r={r} outside 1..{n}")
    if r < n and not gap_holds(bal.sigma, r, gap_tol):
        suggestion = _nearest_admissible(bal.sigma, r, gap_tol)
        raise OrderSelectionError(
            f"σ_{r} = {bal.sigma[r - 1]:.6e} and σ_{r + 1} = {bal.sigma[r]:.6e} are not separated; "
            f"nearest admissible order is {suggestion}",
            suggestion=suggestion,
        )

    full = bal.system
    reduced = StochasticSystem(
        A=full.A[:r, :r],
        N=[Ni[:r, :r] for Ni in full.N],
        B=full.B[:r, :],
        C=full.C[:, :r],
        K=full.K,
        metadata={**full.metadata, "reduced_order": r},
    )
    return ReducedModel(
        system=reduced,
        sigma_r=bal.sigma[:r].copy(),
        V=bal.S_b_inv[:, :r],
        W=bal.S_b[:r, :],
        r=r,
    )


def hat_sigma(sigma: np.ndarray) -> np.ndarray:
    """σ/√(1+σ²), the singular values of the normalized pair."""
    sigma = np.asarray(sigma, dtype=float)
    return sigma / np.sqrt(1.0 + sigma**2)


def tail_coefficient(sigma: np.ndarray, r: int) -> float:
    """2·Σ_{k>r} σ_k/√(1+σ_k²)."""
    return float(2.0 * np.sum(hat_sigma(sigma)[r:]))


def choose_order(sigma, rel_tol: float, gap_tol: float = 1e-10) -> OrderChoice:
    """Smallest r whose tail coefficient is ≤ rel_tol, raised until the gap condition holds."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    if n == 0 or np.any(sigma <= 0) or np.any(np.diff(sigma) > 0):
        raise InputError("sigma must be positive and non-increasing")
    if rel_tol < 0:
        raise InputError(f"rel_tol must be non-negative, got {rel_tol}")

    # tails[r] = 2 Σ_{k>r} σ̂_k for r = 0..n
    tails = 2.0 * np.concatenate([np.cumsum(hat_sigma(sigma)[::-1])[::-1], [0.0]])
    r = next(r for r in range(1, n + 1) if tails[r] <= rel_tol)
    raised = False
    while r < n and not gap_holds(sigma, r, gap_tol):
        r += 1
        raised = True
    if raised and r == n:
        return OrderChoice(r=n, warning="no admissible order below n meets the tolerance and the gap condition")
    return OrderChoice(r=r)
