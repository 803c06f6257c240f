"""
Quadratic cost J_T(x₀, u) = ∫₀ᵀ E(‖u(t)‖² + ‖y(t)‖²) dt and weighted L² norms,
evaluated from moment trajectories or from sampled paths.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

try:
    from ..core.errors import InputError
    from .moments import MomentTrajectory
    from .sde import PathBatch
except ImportError:
    from core.errors import InputError
    from simulate.moments import MomentTrajectory
    from simulate.sde import PathBatch


@dataclass
class CostEstimate:
    value: float
    standard_error: float = 0.0
    method: str = "moments"

    def to_dict(self) -> dict:
        return {"value": self.value, "standard_error": self.standard_error, "method": self.method}


def _horizon_mask(t: np.ndarray, T: float | None) -> np.ndarray:
    if T is None:
        return np.ones(t.size, dtype=bool)
    if T < 0 or T > t[-1] + 1e-12 * max(1.0, t[-1]):
        raise InputError(f"Horizon T={T} outside the simulated interval [0, {t[-1]}]")
    return t <= T + 1e-12 * max(1.0, T)


def cost_functional(data: MomentTrajectory | PathBatch, T: float | None = None) -> CostEstimate:
    """
    Trapezoidal quadrature of E‖u‖² + E‖y‖² up to T (the full grid by default).

    Moment data gives the exact integrand; sampled paths give a Monte Carlo
    average over per-path integrals with its standard error.
    """
    mask = _horizon_mask(data.t, T)
    t = data.t[mask]
    if isinstance(data, MomentTrajectory):
        power = data.input_power[mask] + data.output_power[mask]
        return CostEstimate(value=float(trapezoid(power, t)))
    if isinstance(data, PathBatch):
        power = np.sum(data.y[:, mask] ** 2, axis=2) + np.sum(data.u[:, mask] ** 2, axis=2)
        per_path = trapezoid(power, t, axis=1)
        error = float(per_path.std(ddof=1) / np.sqrt(per_path.size)) if per_path.size > 1 else float("nan")
        return CostEstimate(value=float(per_path.mean()), standard_error=error, method="monte_carlo")
    raise InputError(f"Cannot evaluate a cost from {type(data).__name__}")


def weighted_l2_norm(t: np.ndarray, power: np.ndarray, beta: float = 0.0) -> float:
    """(∫ e^{−βt} power(t) dt)^{1/2} by the trapezoidal rule."""
    t = np.asarray(t, dtype=float)
    power = np.asarray(power, dtype=float)
    if t.shape != power.shape:
        raise InputError(f"Grid and integrand differ in shape: {t.shape} vs {power.shape}")
    if np.any(power < -1e-12 * max(1.0, np.abs(power).max())):
        raise InputError("Power series must be non-negative")
    return float(np.sqrt(max(trapezoid(np.exp(-beta * t) * power, t), 0.0)))
