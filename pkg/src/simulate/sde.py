"""
Drift-implicit Euler–Maruyama sampling of

    dx = (A x + B u) dt + Σ_i N_i x dW_i,   y = C x,

with correlated Wiener increments ΔW ~ Normal(0, K dt).

Every path draws from its own counter-based stream spawned from the run seed,
so results do not depend on chunking or on the number of worker threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

try:
    from ..core.config import SimulationConfig
    from ..core.errors import InputError, NumericalError, StepSizeError
    from ..core.linalg import psd_factor
    from ..core.system import StochasticSystem
    from .controls import ControlSpec
except ImportError:
    from core.config import SimulationConfig
    from core.errors import InputError, NumericalError, StepSizeError
    from core.linalg import psd_factor
    from core.system import StochasticSystem
    from simulate.controls import ControlSpec

logger = logging.getLogger(__name__)


@dataclass
class PathBatch:
    """Sampled paths, recorded every ``record_every`` steps."""
    t: np.ndarray          # recorded times
    y: np.ndarray          # (n_paths, frames, p)
    u: np.ndarray          # (n_paths, frames, m)
    x_final: np.ndarray    # (n_paths, n)
    seed: int
    dt: float

    @property
    def n_paths(self) -> int:
        return self.y.shape[0]

    @staticmethod
    def _mean_and_error(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = samples.shape[0]
        mean = samples.mean(axis=0)
        if n < 2:
            return mean, np.full_like(mean, np.nan)
        return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)

    def output_power(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample mean of ‖y(t)‖² over paths and its standard error."""
        return self._mean_and_error(np.sum(self.y**2, axis=2))

    def input_power(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_and_error(np.sum(self.u**2, axis=2))

    def terminal_moment(self, W: np.ndarray | None = None) -> tuple[float, float]:
        """Sample mean of x(T)ᵀ W x(T) (W = I by default) and its standard error."""
        x = self.x_final
        values = np.einsum("bi,bi->b", x, x if W is None else x @ np.asarray(W, dtype=float).T)
        mean, error = self._mean_and_error(values)
        return float(mean), float(error)


def _implicit_factor(A_cl: np.ndarray, dt: float):
    M = np.eye(A_cl.shape[0]) - dt * A_cl
    lu = linalg.lu_factor(M)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.size and pivots.min() <= 1e-14 * max(1.0, np.abs(M).max()):
        raise StepSizeError(f"I - dt·A_cl is singular for dt={dt}")
    return lu


def _path_streams(seed: int, n_paths: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_paths)


def _simulate_chunk(
    sys: StochasticSystem,
    lu,
    F: np.ndarray,
    u1: np.ndarray,
    x0: np.ndarray,
    streams: list[np.random.SeedSequence],
    dt: float,
    steps: int,
    record: np.ndarray,
    L: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch = len(streams)
    q = sys.q
    sqrt_dt = np.sqrt(dt)
    # (batch, steps, q) standard normals, one stream per path
    Z = np.stack([np.random.Generator(np.random.Philox(s)).standard_normal((steps, q)) for s in streams])
    dW = (Z @ L.T) * sqrt_dt
    N = np.stack(sys.N) if sys.N else np.zeros((0, sys.n, sys.n))

    X = np.broadcast_to(x0, (batch, sys.n)).copy()
    ys = np.empty((batch, record.size, sys.p))
    us = np.empty((batch, record.size, sys.m))
    slot = 0
    for k in range(steps + 1):
        if slot < record.size and record[slot] == k:
            ys[:, slot] = X @ sys.C.T
            us[:, slot] = X @ F.T + u1[k]
            slot += 1
        if k == steps:
            break
        rhs = X + dt * (sys.B @ u1[k])
        if q:
            rhs = rhs + np.einsum("qij,bj,bq->bi", N, X, dW[:, k])
        X = linalg.lu_solve(lu, rhs.T).T
    if not np.all(np.isfinite(X)):
        raise NumericalError("Sample paths diverged to non-finite values; reduce dt")
    return ys, us, X


def integrate_sde(
    sys: StochasticSystem,
    control: ControlSpec,
    cfg: SimulationConfig,
    n_paths: int | None = None,
    x0: np.ndarray | None = None,
) -> PathBatch:
    """
    Sample cfg.n_paths paths with the drift-implicit Euler–Maruyama scheme

        (I − dt·A_cl) x_{k+1} = x_k + dt·B·u¹_k + Σ_i N_i x_k ΔW_{i,k}.

    Raises:
        StepSizeError: I − dt·A_cl is singular
        NumericalError: paths became non-finite
    """
    n_paths = cfg.n_paths if n_paths is None else n_paths
    if n_paths < 1:
        raise InputError("Monte Carlo simulation needs n_paths >= 1")
    t = cfg.grid()
    steps = t.size - 1
    x0 = cfg.resolve_x0(sys.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.shape != (sys.n,):
        raise InputError(f"x0 has {x0.size} entries, system dimension is {sys.n}")

    A_cl = control.closed_drift(sys)
    F = control.input_gain(sys)
    u1 = control.offset_on_grid(t, sys.m)
    lu = _implicit_factor(A_cl, cfg.dt)
    L = psd_factor(sys.K) if sys.q else np.zeros((0, 0))

    record = np.unique(np.append(np.arange(0, steps + 1, cfg.record_every), steps))
    streams = _path_streams(cfg.seed, n_paths)
    chunks = [(start, min(start + cfg.chunk_size, n_paths)) for start in range(0, n_paths, cfg.chunk_size)]

    y = np.empty((n_paths, record.size, sys.p))
    u = np.empty((n_paths, record.size, sys.m))
    x_final = np.empty((n_paths, sys.n))

    def run(bounds: tuple[int, int]) -> tuple[int, int]:
        lo, hi = bounds
        y[lo:hi], u[lo:hi], x_final[lo:hi] = _simulate_chunk(
            sys, lu, F, u1, x0, streams[lo:hi], cfg.dt, steps, record, L
        )
        return bounds

    workers = min(cfg.resolve_workers(), len(chunks))
    logger.info("Sampling %d paths over %d steps in %d chunks (%d threads)", n_paths, steps, len(chunks), workers)
    if workers <= 1:
        for bounds in chunks:
            run(bounds)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for lo, hi in pool.map(run, chunks):
                logger.debug("Paths %d-%d done", lo, hi - 1)

    return PathBatch(t=t[record], y=y, u=u, x_final=x_final, seed=cfg.seed, dt=cfg.dt)
