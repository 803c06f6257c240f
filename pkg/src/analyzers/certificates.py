"""
Certificates that the truncated model keeps the structure of the full one:
mean-square stability of the reduced LQG closed loop, detectability of the
reduced triple and the two balanced type-II inequalities.
"""

import logging
from dataclasses import dataclass

import numpy as np

try:
    from ..balancing.balanced_truncation import BalancedRealization, ReducedModel
    from ..core.config import BalancingConfig
    from ..core.linalg import lambda_max, symmetrize
    from ..core.operators import (
        DEFAULT_MAX_DIM, HautusResult, SpectralCertificate, apply_operator, hautus_detectability,
        mean_square_stability,
    )
except ImportError:
    from balancing.balanced_truncation import BalancedRealization, ReducedModel
    from core.config import BalancingConfig
    from core.linalg import lambda_max, symmetrize
    from core.operators import (
        DEFAULT_MAX_DIM, HautusResult, SpectralCertificate, apply_operator, hautus_detectability,
        mean_square_stability,
    )

logger = logging.getLogger(__name__)

MARGIN_TOL = 1e-8


@dataclass
class PreservationCertificate:
    reduced_closed_loop: SpectralCertificate
    detectability: HautusResult
    typeII_margins: tuple[float, float]

    @property
    def reduced_detectable(self) -> bool:
        return self.detectability.holds

    @property
    def passed(self) -> bool:
        return (
            self.reduced_closed_loop.stable
            and self.reduced_detectable
            and max(self.typeII_margins) <= MARGIN_TOL
        )

    def to_dict(self) -> dict:
        return {
            "reduced_closed_loop": self.reduced_closed_loop.to_dict(),
            "reduced_detectable": self.reduced_detectable,
            "detectability": self.detectability.to_dict(),
            "typeII_margins": list(self.typeII_margins),
            "passed": self.passed,
        }


def _relative_margin(terms: list[np.ndarray]) -> float:
    total = symmetrize(sum(terms))
    scale = sum(np.linalg.norm(T, 2) for T in terms)
    return lambda_max(total) / max(scale, 1e-300)


def typeII_margins(bal: BalancedRealization) -> tuple[float, float]:
    """
    Relative λ_max of the balanced closed-loop inequalities

        (L_{A_c} + Π_N)(Σ) + CᵀC + ΣBBᵀΣ ≤ 0
        (L_{A_c} + Π_N)(Υ⁻¹) + Υ⁻¹BBᵀΥ⁻¹ ≤ 0,   Υ⁻¹ = Σ + Σ⁻¹,

    with A_c = A − BBᵀΣ; each margin is scaled by the norms of its terms.
    """
    sys = bal.system
    Sigma = np.diag(bal.sigma)
    U_inv = Sigma + np.diag(1.0 / bal.sigma)
    closed = sys.replace(A=sys.A - sys.B @ sys.B.T @ Sigma)

    SB = Sigma @ sys.B
    UB = U_inv @ sys.B
    first = _relative_margin([apply_operator(closed, Sigma), sys.C.T @ sys.C, SB @ SB.T])
    second = _relative_margin([apply_operator(closed, U_inv), UB @ UB.T])
    return first, second


def preservation_certificates(
    bal: BalancedRealization,
    reduced: ReducedModel,
    cfg: BalancingConfig | None = None,
    max_dim: int = DEFAULT_MAX_DIM,
) -> PreservationCertificate:
    """
    Certify the reduced model built from the balanced realization ``bal``.

    In balanced coordinates Q = P = Σ, so the Gramians enter through bal.sigma.
    Failed certificates are reported, never raised.
    """
    cfg = cfg or BalancingConfig()
    red = reduced.system
    loop = red.replace(A=red.A - red.B @ red.B.T @ reduced.Sigma_r)
    stability = mean_square_stability(loop, max_dim=max_dim)
    detectability = hautus_detectability(red, tol=cfg.hautus_tol, samples=cfg.hautus_samples, max_dim=max_dim)
    margins = typeII_margins(bal)

    certificate = PreservationCertificate(stability, detectability, margins)
    logger.info(
        "Certificates r=%d: closed-loop abscissa %.3e, detectable %s, margins %.2e / %.2e",
        reduced.r, stability.abscissa, detectability.holds, margins[0], margins[1],
    )
    return certificate
