import pytest

from core.config import (
    BalancingConfig,
    PipelineConfig,
    SimulationConfig,
    SolverConfig,
    load_config,
)
from core.errors import InputError


class TestLoadConfig:
    def test_defaults_file(self):
        config = load_config()
        assert isinstance(config, PipelineConfig)
        assert config.solver.tol == 1e-10
        assert config.benchmark.n == 36
        assert config.simulation.T == 10.0

    def test_overlay(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("solver:\n  tol: 1.0e-8\nsimulation:\n  T: 2.0\n  n_paths: 100\n")
        config = load_config(path)
        assert config.solver.tol == 1e-8
        assert config.solver.max_outer == 200
        assert config.simulation.n_paths == 100

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("solver:\n  tolerance: 1.0e-8\n")
        with pytest.raises(InputError, match="tolerance"):
            load_config(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("plotting:\n  dpi: 300\n")
        with pytest.raises(InputError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_config(tmp_path / "absent.yaml")


class TestSimulationConfig:
    def test_grid(self):
        cfg = SimulationConfig(T=1.0, dt=0.25)
        assert cfg.n_steps == 4
        assert cfg.grid().tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_random_unit_initial_state(self):
        x0 = SimulationConfig(x0="random-unit", seed=3).resolve_x0(5)
        assert x0.shape == (5,)
        assert sum(x0**2) == pytest.approx(1.0)

    def test_thread_count_from_environment(self, monkeypatch):
        monkeypatch.setenv("LQGBT_THREADS", "3")
        assert SimulationConfig().resolve_workers() == 3

    def test_explicit_workers_win(self, monkeypatch):
        monkeypatch.setenv("LQGBT_THREADS", "3")
        assert SimulationConfig(workers=1).resolve_workers() == 1

    def test_with_updates(self):
        cfg = SimulationConfig().with_updates(seed=9)
        assert cfg.seed == 9
        assert cfg.T == SimulationConfig().T


class TestValidation:
    def test_solver_tolerance(self):
        with pytest.raises(InputError):
            SolverConfig(tol=0.0)

    def test_gap_tolerance(self):
        with pytest.raises(InputError):
            BalancingConfig(gap_tol=-1.0)

    def test_step_size(self):
        with pytest.raises(InputError):
            SimulationConfig(dt=0.0)
