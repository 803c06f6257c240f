import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from core.config import HeatBenchmarkConfig, PipelineConfig, SimulationConfig  # noqa: E402
from core.system import StochasticSystem, scalar_system  # noqa: E402


def random_stable_system(n: int, m: int = 1, p: int = 1, seed: int = 0, noise: float = 0.3) -> StochasticSystem:
    """Random system with A shifted well into the left half plane and one small noise channel."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A = A - (np.max(np.linalg.eigvals(A).real) + 1.5) * np.eye(n)
    N1 = noise * rng.standard_normal((n, n)) / np.sqrt(n)
    return StochasticSystem(
        A=A,
        N=[N1],
        B=rng.standard_normal((n, m)),
        C=rng.standard_normal((p, n)),
        K=np.eye(1),
    )


@pytest.fixture
def lq_scalar() -> StochasticSystem:
    """a=−1, b=1, c=1, n₁=0.5, k=1: Riccati root of q² + 1.75q − 1 = 0."""
    return scalar_system(-1.0, b=1.0, c=1.0, n1=0.5, k=1.0)


@pytest.fixture
def decaying_scalar() -> StochasticSystem:
    """a=−1, n₁=1, k=1, c=1: E x(t)² = e^{−t} from x₀ = 1."""
    return scalar_system(-1.0, b=0.0, c=1.0, n1=1.0, k=1.0)


@pytest.fixture
def small_system() -> StochasticSystem:
    return StochasticSystem(
        A=[[-1.0, 0.5, 0.0], [0.0, -2.0, 0.3], [0.1, 0.0, -3.0]],
        N=[0.3 * np.array([[0.5, 0.1, 0.0], [0.0, 0.4, 0.1], [0.1, 0.0, 0.3]])],
        B=[[1.0], [0.5], [0.2]],
        C=[[1.0, 1.0, 1.0]],
        K=[[1.0]],
    )


@pytest.fixture
def fine_grid() -> SimulationConfig:
    return SimulationConfig(T=2.0, dt=1e-4, record_every=1000, workers=1)


@pytest.fixture(scope="session")
def heat_config() -> PipelineConfig:
    return PipelineConfig(benchmark=HeatBenchmarkConfig(n=36))


@pytest.fixture(scope="session")
def heat_pipeline(heat_config, tmp_path_factory):
    """Benchmark n=36 with Gramians and balancing done once per session."""
    from core.orchestrator import ReductionPipeline

    pipeline = ReductionPipeline(heat_config, tmp_path_factory.mktemp("heat"))
    pipeline.build_benchmark()
    pipeline.compute_gramians()
    pipeline.balance()
    return pipeline
