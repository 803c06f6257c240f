import json

import numpy as np
import pytest

from cli import build_parser, main
from core.orchestrator import ReductionPipeline
from deployers.bundles import read_csv, save_gramians, save_system


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    """bench, gramians and reduce on a four-mode heat benchmark."""
    root = tmp_path_factory.mktemp("cli")
    codes = [
        main(["-q", "bench", "--n", "4", "--out", str(root / "system")]),
        main(["-q", "gramians", "--system", str(root / "system"), "--out", str(root / "gramians")]),
        main(["-q", "reduce", "--system", str(root / "system"), "--gramians", str(root / "gramians"),
              "--tol", "1e-2", "--out", str(root / "reduced")]),
    ]
    return root, codes


class TestPipelineCommands:
    def test_exit_codes(self, bench_run):
        _, codes = bench_run
        assert codes == [0, 0, 0]

    def test_bench_outputs(self, bench_run):
        root, _ = bench_run
        checks = json.loads((root / "system" / "checks.json").read_text())
        assert checks["mean_square_stable"] is False
        assert checks["stabilizable"] is True
        assert (root / "system" / "manifest.json").exists()

    def test_gramian_outputs(self, bench_run):
        root, _ = bench_run
        diagnostics = json.loads((root / "gramians" / "diagnostics.json").read_text())
        assert diagnostics["lambda_min_P"] > 0
        assert diagnostics["lambda_min_Q"] > 0

    def test_sigma_table(self, bench_run):
        root, _ = bench_run
        columns = read_csv(root / "reduced" / "sigma.csv")
        assert columns["k"].size == 4
        assert np.all(np.diff(columns["sigma"]) <= 0)

    def test_bounds(self, bench_run):
        root, _ = bench_run
        out = root / "bounds.json"
        code = main(["-q", "bounds", "--system", str(root / "system"), "--gramians", str(root / "gramians"),
                     "--reduced", str(root / "reduced"), "--horizon", "1", "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["certificates"]["passed"] is True
        assert data["report"]["gamma_T"] == pytest.approx(np.exp(data["report"]["b_r"]))

    def test_simulate_closed(self, bench_run):
        root, _ = bench_run
        out = root / "sim"
        code = main(["-q", "simulate", "--system", str(root / "system"), "--gramians", str(root / "gramians"),
                     "--reduced", str(root / "reduced"), "--mode", "closed", "--T", "1", "--dt", "1e-2",
                     "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["bounds"]["feedback"]["holds"] is True
        assert (out / "moments.csv").exists()

    def test_simulate_needs_gramians(self, bench_run):
        root, _ = bench_run
        code = main(["-q", "simulate", "--system", str(root / "system"), "--reduced", str(root / "reduced"),
                     "--out", str(root / "nowhere")])
        assert code == 2


class TestExitCodes:
    def test_missing_system(self, tmp_path):
        code = main(["-q", "gramians", "--system", str(tmp_path / "absent"), "--out", str(tmp_path / "g")])
        assert code == 2

    def test_gap_violation(self, small_system, tmp_path):
        save_system(small_system, tmp_path / "system")
        pair = np.diag([5.0, 2.0, 2.0])
        save_gramians(pair, pair, {}, tmp_path / "gramians")
        code = main(["-q", "reduce", "--system", str(tmp_path / "system"), "--gramians", str(tmp_path / "gramians"),
                     "--order", "2", "--out", str(tmp_path / "reduced")])
        assert code == 3
        assert not (tmp_path / "reduced").exists()

    @pytest.mark.parametrize("failing", ["detectable", "stabilizable"])
    def test_bench_fails_on_missing_precondition(self, tmp_path, monkeypatch, failing):
        checks = {"mean_square_stable": False, "spectral_abscissa": 0.5, "detectable": True, "stabilizable": True}
        checks[failing] = False
        monkeypatch.setattr(ReductionPipeline, "check_preconditions", lambda self: dict(checks))
        code = main(["-q", "bench", "--n", "3", "--out", str(tmp_path / "system")])
        assert code == 2
        written = json.loads((tmp_path / "system" / "checks.json").read_text())
        assert written[failing] is False

    def test_invalid_benchmark_size(self, tmp_path):
        assert main(["-q", "bench", "--n", "0", "--out", str(tmp_path)]) == 2

    def test_order_and_tol_are_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["reduce", "--system", "s", "--gramians", "g", "--order", "2",
                                       "--tol", "1e-3", "--out", "o"])


class TestDeterminism:
    def test_repeated_runs_are_byte_identical(self, tmp_path):
        for run in ("a", "b"):
            root = tmp_path / run
            assert main(["-q", "bench", "--n", "3", "--out", str(root / "system")]) == 0
            assert main(["-q", "gramians", "--system", str(root / "system"), "--out", str(root / "gramians")]) == 0
        for name in ("system/manifest.json", "system/N1.mtx", "system/checks.json",
                     "gramians/P.mtx", "gramians/Q.mtx", "gramians/diagnostics.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
