"""
Exact first and second moments of the controlled SDE.

For u = F x + u¹ with deterministic u¹ the mean m = E x and second moment
X = E x xᵀ solve the closed linear system

    ṁ = A_cl m + B u¹
    Ẋ = A_cl X + X A_clᵀ + Σ_ij k_ij N_i X N_jᵀ + B u¹ mᵀ + m u¹ᵀ Bᵀ,

integrated here by the implicit midpoint rule in half-vectorized form.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

try:
    from ..core.config import SimulationConfig
    from ..core.errors import InputError, StepSizeError
    from ..core.linalg import unvech, vech, vech_indices
    from ..core.operators import symmetric_matricization
    from ..core.system import StochasticSystem
    from .controls import ControlSpec
except ImportError:
    from core.config import SimulationConfig
    from core.errors import InputError, StepSizeError
    from core.linalg import unvech, vech, vech_indices
    from core.operators import symmetric_matricization
    from core.system import StochasticSystem
    from simulate.controls import ControlSpec

logger = logging.getLogger(__name__)

PSD_TOL = 1e-8


@dataclass
class MomentTrajectory:
    """Mean, second moments and derived expectations on a time grid."""
    t: np.ndarray
    mean: np.ndarray                       # (M+1, n)
    frame_times: np.ndarray                # times of stored second moments
    second_moment: np.ndarray              # (frames, n, n)
    output_power: np.ndarray               # E‖y‖²
    input_power: np.ndarray                # E‖u‖²
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def X_final(self) -> np.ndarray:
        return self.second_moment[-1]

    def columns(self) -> dict[str, np.ndarray]:
        """Named time series for CSV export."""
        data = {"t": self.t, "output_power": self.output_power, "input_power": self.input_power}
        data.update(self.observables)
        return data


def trace_weights(W: np.ndarray) -> np.ndarray:
    """w with wᵀ vech(X) = tr(W X) for symmetric W and X."""
    n = W.shape[0]
    rows, cols, _, _ = vech_indices(n)
    w = 2.0 * vech(0.5 * (W + W.T))
    w[rows == cols] *= 0.5
    return w


def midpoint_propagators(M: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """
    (R, S) with R = (I − hM/2)⁻¹(I + hM/2) and S = h(I − hM/2)⁻¹, so one implicit
    midpoint step of ż = Mz + g reads z⁺ = R z + S g_mid.
    """
    I = np.eye(M.shape[0])
    try:
        lu = linalg.lu_factor(I - 0.5 * h * M, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise StepSizeError(f"Implicit midpoint matrix is singular for dt={h}: {e}")
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.abs(lu[0]).max():
        raise StepSizeError(f"Implicit midpoint matrix is singular for dt={h}")
    R = linalg.lu_solve(lu, I + 0.5 * h * M)
    S = h * linalg.lu_solve(lu, I)
    return R, S


def _check_psd(X: np.ndarray, step: int) -> None:
    w = linalg.eigvalsh(X)
    if w[-1] > 0 and w[0] < -PSD_TOL * w[-1]:
        raise StepSizeError(
            f"Second moment lost positive semidefiniteness at step {step} "
            f"(λ_min {w[0]:.3e}, λ_max {w[-1]:.3e}); reduce dt"
        )


def propagate_moments(
    sys: StochasticSystem,
    control: ControlSpec,
    cfg: SimulationConfig,
    observables: dict[str, np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> MomentTrajectory:
    """
    Integrate the moment equations on cfg's grid.

    Args:
        sys: system to simulate
        control: zero, deterministic open-loop or linear feedback control
        cfg: grid, storage stride and initial state
        observables: named symmetric weights W; emits tr(W X(t))
        x0: initial state overriding cfg.x0

    Returns:
        MomentTrajectory with E‖y‖², E‖u‖² and the requested observables
    """
    n, m = sys.n, sys.m
    t = cfg.grid()
    h = cfg.dt
    steps = t.size - 1
    x0 = cfg.resolve_x0(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.shape != (n,):
        raise InputError(f"x0 has {x0.size} entries, system dimension is {n}")

    A_cl = control.closed_drift(sys)
    F = control.input_gain(sys)
    u1 = control.offset_on_grid(t, m)
    closed = sys.replace(A=A_cl)

    R_X, S_X = midpoint_propagators(symmetric_matricization(closed, adjoint=True), h)
    R_m, S_m = midpoint_propagators(A_cl, h)

    w_out = trace_weights(sys.C.T @ sys.C)
    w_in = trace_weights(F.T @ F)
    weights = {name: trace_weights(np.asarray(W, dtype=float)) for name, W in (observables or {}).items()}

    mean = np.zeros((t.size, n))
    z = vech(np.outer(x0, x0))
    mean[0] = x0
    forced = bool(np.any(u1))

    output_power = np.zeros(t.size)
    input_power = np.zeros(t.size)
    series = {name: np.zeros(t.size) for name in weights}
    frames, frame_times = [], []

    def record(k: int, z: np.ndarray) -> None:
        output_power[k] = w_out @ z
        input_power[k] = w_in @ z + 2.0 * u1[k] @ (F @ mean[k]) + u1[k] @ u1[k]
        for name, w in weights.items():
            series[name][k] = w @ z
        if k % cfg.record_every == 0 or k == steps:
            frames.append(unvech(z, n))
            frame_times.append(t[k])

    record(0, z)
    for k in range(steps):
        if forced:
            u_mid = 0.5 * (u1[k] + u1[k + 1])
            mean[k + 1] = R_m @ mean[k] + S_m @ (sys.B @ u_mid)
            m_mid = 0.5 * (mean[k] + mean[k + 1])
            Bu = sys.B @ u_mid
            z = R_X @ z + S_X @ vech(np.outer(Bu, m_mid) + np.outer(m_mid, Bu))
        else:
            mean[k + 1] = R_m @ mean[k]
            z = R_X @ z
        _check_psd(unvech(z, n), k + 1)
        record(k + 1, z)

    logger.debug("Propagated moments over %d steps (n=%d)", steps, n)
    return MomentTrajectory(
        t=t,
        mean=mean,
        frame_times=np.array(frame_times),
        second_moment=np.array(frames),
        output_power=output_power,
        input_power=input_power,
        observables=series,
    )
