"""
Heat Benchmark - spectral Galerkin discretization of the 2D stochastic heat
equation on [0, π]² with Neumann boundary conditions.

    dX = α ΔX dt + 1_{[π/4,3π/4]²} u dt + ν g X dW,   g(ζ) = e^{−|ζ₁−π/2|−ζ₂}

The state holds the coefficients of X in the first n normalized Neumann
eigenfunctions h_ij = cos(i·)cos(j·)/‖cos(i·)cos(j·)‖, ordered by the
eigenvalue −(i²+j²). The output is the mean temperature on the uncontrolled
area.

Every coefficient except the noise coupling is an analytic integral. The
noise coupling factorizes into two 1-D Gauss–Legendre quadratures.
"""

import logging

import numpy as np

try:
    from ..core.config import HeatBenchmarkConfig
    from ..core.errors import AccuracyError
    from ..core.system import StochasticSystem
except ImportError:
    from core.config import HeatBenchmarkConfig
    from core.errors import AccuracyError
    from core.system import StochasticSystem

logger = logging.getLogger(__name__)

QUADRATURE_TOL = 1e-10
OUTPUT_SCALE = 4.0 / (3.0 * np.pi**2)  # 1 / area of the uncontrolled region


# =============================================================================
# MODES
# =============================================================================

def eigen_modes(n: int) -> np.ndarray:
    """First n index pairs (i, j), ordered by i²+j², ties lexicographic."""
    K = int(np.ceil(np.sqrt(n))) + 1
    pairs = [(i, j) for i in range(K + 1) for j in range(K + 1)]
    pairs.sort(key=lambda ij: (ij[0] ** 2 + ij[1] ** 2, ij[0], ij[1]))
    return np.array(pairs[:n], dtype=int)


def basis_norms(modes: np.ndarray) -> np.ndarray:
    """‖cos(i·)cos(j·)‖ on [0, π]²."""
    i, j = modes[:, 0], modes[:, 1]
    return np.pi * np.sqrt(np.where(i > 0, 0.5, 1.0) * np.where(j > 0, 0.5, 1.0))


# =============================================================================
# ANALYTIC 1-D INTEGRALS
# =============================================================================

def _cos_integral_control(i: np.ndarray) -> np.ndarray:
    """∫_{π/4}^{3π/4} cos(iζ) dζ."""
    i = np.asarray(i, dtype=float)
    safe = np.where(i > 0, i, 1.0)
    value = (np.sin(0.75 * np.pi * safe) - np.sin(0.25 * np.pi * safe)) / safe
    return np.where(i > 0, value, 0.5 * np.pi)


def _cos_integral_domain(i: np.ndarray) -> np.ndarray:
    """∫_0^π cos(iζ) dζ."""
    return np.where(np.asarray(i) == 0, np.pi, 0.0)


# =============================================================================
# QUADRATURE
# =============================================================================

def _gauss_rule(a: float, b: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(points)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def _split_rule(points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0, π] split at π/2 where |ζ − π/2| has its kink."""
    x1, w1 = _gauss_rule(0.0, 0.5 * np.pi, points)
    x2, w2 = _gauss_rule(0.5 * np.pi, np.pi, points)
    return np.concatenate([x1, x2]), np.concatenate([w1, w2])


def _weighted_cos_gram(freqs: np.ndarray, weight, points: int) -> np.ndarray:
    """G[a, b] = ∫_0^π weight(ζ) cos(aζ) cos(bζ) dζ for the given frequencies."""
    x, w = _split_rule(points)
    basis = np.cos(np.outer(freqs, x))
    return (basis * (w * weight(x))) @ basis.T


def _g1(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.abs(x - 0.5 * np.pi))


def _g2(x: np.ndarray) -> np.ndarray:
    return np.exp(-x)


def _one(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x)


def noise_coupling(modes: np.ndarray, nu: float, points: int) -> np.ndarray:
    """N₁[k, l] = ν ∫ g h_k h_l over [0, π]²."""
    freqs = np.arange(modes.max() + 1)
    G1 = _weighted_cos_gram(freqs, _g1, points)
    G2 = _weighted_cos_gram(freqs, _g2, points)
    norms = basis_norms(modes)
    i, j = modes[:, 0], modes[:, 1]
    N1 = nu * G1[np.ix_(i, i)] * G2[np.ix_(j, j)] / np.outer(norms, norms)
    return 0.5 * (N1 + N1.T)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1.0))


def _self_check(modes: np.ndarray, cfg: HeatBenchmarkConfig, N1: np.ndarray, B: np.ndarray, C: np.ndarray) -> None:
    """Refinement, orthonormality and analytic cross-checks of the discretization."""
    refined = noise_coupling(modes, cfg.nu, 2 * cfg.quad_points)
    gap = _relative_gap(N1, refined)
    if gap > QUADRATURE_TOL:
        raise AccuracyError(f"Noise coupling changes by {gap:.3e} under quadrature refinement")

    freqs = np.arange(modes.max() + 1)
    G0 = _weighted_cos_gram(freqs, _one, cfg.quad_points)
    norms = basis_norms(modes)
    i, j = modes[:, 0], modes[:, 1]
    gram = G0[np.ix_(i, i)] * G0[np.ix_(j, j)] / np.outer(norms, norms)
    gap = _relative_gap(gram, np.eye(modes.shape[0]))
    if gap > QUADRATURE_TOL:
        raise AccuracyError(f"Basis is not orthonormal under quadrature (deviation {gap:.3e})")

    x, w = _gauss_rule(0.25 * np.pi, 0.75 * np.pi, cfg.quad_points)
    control = np.cos(np.outer(freqs, x)) @ w
    B_quad = control[i] * control[j] / norms
    x, w = _split_rule(cfg.quad_points)
    domain = np.cos(np.outer(freqs, x)) @ w
    C_quad = OUTPUT_SCALE * (domain[i] * domain[j] - control[i] * control[j]) / norms
    gap = max(_relative_gap(B, B_quad), _relative_gap(C, C_quad))
    if gap > QUADRATURE_TOL:
        raise AccuracyError(f"Analytic input/output coefficients disagree with quadrature ({gap:.3e})")


# =============================================================================
# SYSTEM
# =============================================================================

def build_heat_system(cfg: HeatBenchmarkConfig | None = None) -> StochasticSystem:
    """
    Galerkin system of order cfg.n with a single scalar Wiener channel.

    Raises:
        AccuracyError: quadrature self-checks failed
    """
    cfg = cfg or HeatBenchmarkConfig()
    modes = eigen_modes(cfg.n)
    i, j = modes[:, 0], modes[:, 1]
    norms = basis_norms(modes)

    A = cfg.alpha * np.diag(-(i**2 + j**2).astype(float))
    control_i, control_j = _cos_integral_control(i), _cos_integral_control(j)
    B = control_i * control_j / norms
    C = OUTPUT_SCALE * (_cos_integral_domain(i) * _cos_integral_domain(j) - control_i * control_j) / norms
    N1 = noise_coupling(modes, cfg.nu, cfg.quad_points)
    _self_check(modes, cfg, N1, B, C)

    logger.info("Heat benchmark: n=%d, alpha=%g, nu=%g", cfg.n, cfg.alpha, cfg.nu)
    return StochasticSystem(
        A=A,
        N=[N1],
        B=B[:, None],
        C=C[None, :],
        K=np.eye(1),
        metadata={
            "generator": "heat_benchmark",
            "n": cfg.n,
            "alpha": cfg.alpha,
            "nu": cfg.nu,
            "quad_points": cfg.quad_points,
            "modes": modes.tolist(),
        },
    )


def reference_input(t):
    """cos(5t)/(t+1), the test input of the heat benchmark."""
    t = np.asarray(t, dtype=float)
    return np.cos(5.0 * t) / (t + 1.0)
