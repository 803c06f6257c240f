import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from balancing.balanced_truncation import balance, truncate
from core.errors import InputError
from core.system import StochasticSystem
from deployers.bundles import (
    MANIFEST,
    load_gramians,
    load_reduced,
    load_system,
    read_csv,
    read_json,
    save_gramians,
    save_reduced,
    save_system,
    write_json,
    write_sigma_csv,
)


class TestSystemBundle:
    def test_roundtrip(self, small_system, tmp_path):
        save_system(small_system, tmp_path / "sys")
        loaded, manifest = load_system(tmp_path / "sys")
        assert manifest["n"] == 3
        for name in ("A", "B", "C", "K"):
            assert_allclose(getattr(loaded, name), getattr(small_system, name), rtol=0, atol=0)
        assert_allclose(loaded.N[0], small_system.N[0], rtol=0, atol=0)

    def test_resave_is_byte_identical(self, small_system, tmp_path):
        save_system(small_system, tmp_path / "first")
        loaded, _ = load_system(tmp_path / "first")
        save_system(loaded, tmp_path / "second")
        for name in (MANIFEST, "A.mtx", "N1.mtx"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    def test_without_input(self, tmp_path):
        sys = StochasticSystem(A=-np.eye(2), N=[], B=np.zeros((2, 0)), C=[[1.0, 0.0]], K=np.zeros((0, 0)))
        save_system(sys, tmp_path)
        assert read_json(tmp_path / MANIFEST)["files"]["B"] is None
        loaded, _ = load_system(tmp_path)
        assert loaded.B.shape == (2, 0)
        assert loaded.q == 0

    def test_wrong_format(self, tmp_path):
        write_json(tmp_path / MANIFEST, {"format": "something-else"})
        with pytest.raises(InputError):
            load_system(tmp_path)

    def test_dimension_mismatch(self, small_system, tmp_path):
        save_system(small_system, tmp_path)
        manifest = read_json(tmp_path / MANIFEST)
        manifest["n"] = 4
        (tmp_path / MANIFEST).write_text(json.dumps(manifest))
        with pytest.raises(InputError):
            load_system(tmp_path)

    def test_missing_bundle(self, tmp_path):
        with pytest.raises(InputError):
            load_system(tmp_path / "absent")

    def test_invalid_json(self, tmp_path):
        (tmp_path / MANIFEST).write_text("{not json")
        with pytest.raises(InputError):
            load_system(tmp_path)


class TestGramianAndReducedBundles:
    def test_gramians_roundtrip(self, tmp_path):
        P, Q = np.diag([3.0, 2.0, 1.0]), np.array([[2.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 0.5]])
        files = save_gramians(P, Q, {"strategy": "loaded"}, tmp_path)
        P2, Q2 = load_gramians(tmp_path)
        assert_allclose(P2, P, rtol=0, atol=0)
        assert_allclose(Q2, Q, rtol=0, atol=0)
        assert read_json(files["diagnostics"])["strategy"] == "loaded"

    def test_reduced_roundtrip(self, small_system, tmp_path):
        bal = balance(small_system, np.diag([3.0, 2.0, 1.0]), np.diag([3.0, 2.0, 1.0]))
        reduced = truncate(bal, 2)
        save_reduced(reduced, tmp_path, extra={"gap_check": {"passed": True}})
        loaded = load_reduced(tmp_path)
        assert loaded.r == 2
        assert_allclose(loaded.sigma_r, [3.0, 2.0])
        assert_allclose(loaded.V, reduced.V, rtol=0, atol=0)
        assert_allclose(loaded.A_r, reduced.A_r, rtol=0, atol=0)
        assert read_json(tmp_path / MANIFEST)["gap_check"]["passed"] is True

    def test_plain_system_is_not_reduced(self, small_system, tmp_path):
        save_system(small_system, tmp_path)
        with pytest.raises(InputError):
            load_reduced(tmp_path)


class TestSigmaCsv:
    def test_columns(self, tmp_path):
        sigma = np.array([1.0, 1e-3, 1e-4])
        columns = read_csv(write_sigma_csv(tmp_path / "sigma.csv", sigma))
        assert_allclose(columns["k"], [1, 2, 3])
        assert_allclose(columns["sigma"], sigma)
        assert columns["tail_coefficient"][-1] == 0.0
        expected = 2.0 * (1e-3 / np.sqrt(1 + 1e-6) + 1e-4 / np.sqrt(1 + 1e-8))
        assert columns["tail_coefficient"][0] == pytest.approx(expected, rel=1e-14)
