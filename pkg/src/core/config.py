"""
Configuration - dataclass settings for solvers, balancing, simulation and
the heat benchmark, loaded from YAML over built-in defaults.
"""

import os
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import InputError


DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "config" / "defaults.yaml"
THREADS_ENV = "LQGBT_THREADS"


@dataclass
class SolverConfig:
    """Tolerances and budgets of the Gramian solvers."""
    tol: float = 1e-10
    max_outer: int = 200
    lmi_margin: float = 1e-6
    seed: int = 0
    max_subgradient: int = 5000
    psd_clip: float = 1e-8
    trace_steps: int = 40
    newton_steps: int = 3
    max_dim: int = 150
    external_dir: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError(f"tol must be positive, got {self.tol}")
        if self.max_outer < 1:
            raise InputError(f"max_outer must be at least 1, got {self.max_outer}")
        if not self.lmi_margin > 0:
            raise InputError(f"lmi_margin must be positive, got {self.lmi_margin}")
        if self.max_subgradient < 0 or self.trace_steps < 0 or self.newton_steps < 0:
            raise InputError("iteration budgets must be non-negative")


@dataclass
class BalancingConfig:
    gap_tol: float = 1e-10
    hautus_tol: float = 1e-8
    hautus_samples: int = 17

    def __post_init__(self):
        if not self.gap_tol >= 0 or not self.hautus_tol > 0:
            raise InputError("gap_tol must be non-negative and hautus_tol positive")


@dataclass
class SimulationConfig:
    """Time grid, Monte Carlo size and initial state of a simulation run.

    ``x0`` is a vector, ``"zero"`` or ``"random-unit"`` (standard normal
    vector scaled to unit norm, drawn from ``seed``).
    """
    T: float = 10.0
    dt: float = 1e-2
    n_paths: int = 0
    seed: int = 0
    x0: Any = "zero"
    record_every: int = 10
    chunk_size: int = 256
    workers: int | None = None
    power_iterations: int = 60

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise InputError(f"T must be at least dt, got T={self.T}, dt={self.dt}")
        if self.n_paths < 0:
            raise InputError(f"n_paths must be non-negative, got {self.n_paths}")
        if self.record_every < 1 or self.chunk_size < 1:
            raise InputError("record_every and chunk_size must be positive")
        if isinstance(self.x0, str) and self.x0 not in ("zero", "random-unit"):
            raise InputError(f"Unknown initial state spec: {self.x0}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def resolve_x0(self, n: int) -> np.ndarray:
        """Deterministic initial state of dimension n."""
        if isinstance(self.x0, str):
            if self.x0 == "zero":
                return np.zeros(n)
            rng = np.random.default_rng(np.random.SeedSequence(self.seed))
            x0 = rng.standard_normal(n)
            return x0 / np.linalg.norm(x0)
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if x0.shape != (n,):
            raise InputError(f"x0 has {x0.size} entries, system dimension is {n}")
        return x0

    def resolve_workers(self) -> int:
        if self.workers:
            return int(self.workers)
        env = os.getenv(THREADS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise InputError(f"{THREADS_ENV} must be an integer, got {env!r}")
        return os.cpu_count() or 1

    def with_updates(self, **changes) -> "SimulationConfig":
        values = asdict(self)
        values.update(changes)
        return SimulationConfig(**values)


@dataclass
class HeatBenchmarkConfig:
    """Spectral Galerkin discretization of the 2D stochastic heat equation."""
    n: int = 36
    alpha: float = 0.2
    nu: float = 2.0
    quad_points: int = 64

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"n must be at least 1, got {self.n}")
        if not self.alpha > 0:
            raise InputError(f"alpha must be positive, got {self.alpha}")
        if not self.nu >= 0:
            raise InputError(f"nu must be non-negative, got {self.nu}")
        if self.quad_points < 16:
            raise InputError(f"quad_points must be at least 16, got {self.quad_points}")


@dataclass
class PipelineConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    balancing: BalancingConfig = field(default_factory=BalancingConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    benchmark: HeatBenchmarkConfig = field(default_factory=HeatBenchmarkConfig)


_SECTIONS = {
    "solver": SolverConfig,
    "balancing": BalancingConfig,
    "simulation": SimulationConfig,
    "benchmark": HeatBenchmarkConfig,
}


def _build_section(name: str, values: dict | None):
    cls = _SECTIONS[name]
    values = values or {}
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise InputError(f"Unknown keys in '{name}' config: {', '.join(sorted(unknown))}")
    return cls(**values)


def load_config(path: Path | str | None = None) -> PipelineConfig:
    """Load defaults, then overlay the YAML file at ``path`` if given."""
    sources = [DEFAULT_CONFIG_PATH] if DEFAULT_CONFIG_PATH.exists() else []
    if path:
        path = Path(path)
        if not path.exists():
            raise InputError(f"Config file not found: {path}")
        sources.append(path)

    raw: dict = {}
    for source in sources:
        with open(source) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise InputError(f"Config file {source} must contain a mapping")
        for section, values in data.items():
            if section == "version":
                continue
            if section not in _SECTIONS:
                raise InputError(f"Unknown config section: {section}")
            raw.setdefault(section, {}).update(values or {})

    return PipelineConfig(**{name: _build_section(name, raw.get(name)) for name in _SECTIONS})
