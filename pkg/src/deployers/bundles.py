"""
Bundles - on-disk interchange of systems, Gramians, reduced models and
reports.

A bundle is a directory holding ``manifest.json`` and one Matrix Market
array file per coefficient matrix. JSON is written with sorted keys and
matrices with 17 significant digits, so saving a loaded bundle reproduces
it byte for byte.
"""

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from scipy import io as sio

try:
    from ..balancing.balanced_truncation import ReducedModel, hat_sigma
    from ..core.errors import InputError
    from ..core.system import StochasticSystem
except ImportError:
    from balancing.balanced_truncation import ReducedModel, hat_sigma
    from core.errors import InputError
    from core.system import StochasticSystem

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SYSTEM_FORMAT = "lqgbt-system"
FORMAT_VERSION = 1


# =============================================================================
# PRIMITIVES
# =============================================================================

def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}")


def write_matrix(path: Path, M: np.ndarray) -> Path:
    sio.mmwrite(str(path), np.asarray(M, dtype=float), precision=17, symmetry="general")
    return Path(path)


def read_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"Matrix file not found: {path}")
    M = sio.mmread(str(path))
    if hasattr(M, "toarray"):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> Path:
    """Columns of equal length, header row first, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float).ravel() for name in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"CSV file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


# =============================================================================
# SYSTEMS
# =============================================================================

def save_system(sys: StochasticSystem, directory: Path, extra: dict | None = None) -> dict[str, Path]:
    """Write a system bundle; empty B or C are recorded as null files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    files: dict[str, Any] = {}
    for name, M in (("A", sys.A), ("B", sys.B), ("C", sys.C)):
        if M.size == 0:
            files[name] = None
            continue
        written[name] = write_matrix(directory / f"{name}.mtx", M)
        files[name] = f"{name}.mtx"
    files["N"] = []
    for i, Ni in enumerate(sys.N, start=1):
        written[f"N{i}"] = write_matrix(directory / f"N{i}.mtx", Ni)
        files["N"].append(f"N{i}.mtx")

    manifest = {
        "format": SYSTEM_FORMAT,
        "version": FORMAT_VERSION,
        "n": sys.n, "m": sys.m, "p": sys.p, "q": sys.q,
        "K": sys.K.tolist(),
        "files": files,
        "metadata": sys.metadata,
    }
    if extra:
        manifest.update(extra)
    written["manifest"] = write_json(directory / MANIFEST, manifest)
    logger.info("Saved system bundle (n=%d) to %s", sys.n, directory)
    return written


def load_system(directory: Path) -> tuple[StochasticSystem, dict]:
    """Read a system bundle and check the manifest dimensions."""
    directory = Path(directory)
    manifest = read_json(directory / MANIFEST)
    if manifest.get("format") != SYSTEM_FORMAT:
        raise InputError(f"{directory} is not a system bundle")
    n, m, p, q = (int(manifest[key]) for key in ("n", "m", "p", "q"))
    files = manifest["files"]

    A = read_matrix(directory / files["A"])
    B = read_matrix(directory / files["B"]) if files.get("B") else np.zeros((n, 0))
    C = read_matrix(directory / files["C"]) if files.get("C") else np.zeros((0, n))
    N = [read_matrix(directory / name) for name in files.get("N", [])]
    K = np.asarray(manifest.get("K", []), dtype=float).reshape(q, q)
    sys = StochasticSystem(A=A, N=N, B=B, C=C, K=K, metadata=manifest.get("metadata", {}))
    if (sys.n, sys.m, sys.p, sys.q) != (n, m, p, q):
        raise InputError(
            f"Manifest dimensions {(n, m, p, q)} do not match the matrix files {(sys.n, sys.m, sys.p, sys.q)}"
        )
    return sys, manifest


# =============================================================================
# GRAMIANS AND REDUCED MODELS
# =============================================================================

def save_gramians(P: np.ndarray, Q: np.ndarray, diagnostics: dict, directory: Path) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return {
        "P": write_matrix(directory / "P.mtx", P),
        "Q": write_matrix(directory / "Q.mtx", Q),
        "diagnostics": write_json(directory / "diagnostics.json", diagnostics),
    }


def load_gramians(directory: Path) -> tuple[np.ndarray, np.ndarray]:
    directory = Path(directory)
    return read_matrix(directory / "P.mtx"), read_matrix(directory / "Q.mtx")


def save_reduced(reduced: ReducedModel, directory: Path, extra: dict | None = None) -> dict[str, Path]:
    """System bundle of the reduced model plus its lift V and restriction W."""
    directory = Path(directory)
    info = {"reduced": {"r": reduced.r, "sigma_r": reduced.sigma_r.tolist(), "V": "V.mtx", "W": "W.mtx"}}
    info.update(extra or {})
    written = save_system(reduced.system, directory, extra=info)
    written["V"] = write_matrix(directory / "V.mtx", reduced.V)
    written["W"] = write_matrix(directory / "W.mtx", reduced.W)
    return written


def load_reduced(directory: Path) -> ReducedModel:
    directory = Path(directory)
    sys, manifest = load_system(directory)
    info = manifest.get("reduced")
    if not info:
        raise InputError(f"{directory} is a system bundle without reduction data")
    return ReducedModel(
        system=sys,
        sigma_r=np.asarray(info["sigma_r"], dtype=float),
        V=read_matrix(directory / info["V"]),
        W=read_matrix(directory / info["W"]),
        r=int(info["r"]),
    )


def write_sigma_csv(path: Path, sigma: np.ndarray) -> Path:
    """k, σ_k, σ_k/√(1+σ_k²) and the tail coefficient of truncating after k."""
    sigma = np.asarray(sigma, dtype=float)
    hat = hat_sigma(sigma)
    tails = 2.0 * np.concatenate([np.cumsum(hat[::-1])[::-1][1:], [0.0]])
    return write_csv(path, {
        "k": np.arange(1, sigma.size + 1),
        "sigma": sigma,
        "hat_sigma": hat,
        "tail_coefficient": tails,
    })
