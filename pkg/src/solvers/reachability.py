"""
Reachability Gramian - feasible P for the Riccati-type inequality.

Strategy-agnostic interface for the three ways of producing P:
subgradient feasibility on the LMI, the constructive ε-scaling and an
external SDP solver fed through files.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
import logging

import numpy as np
from scipy import linalg

try:
    from ..core.config import SolverConfig
    from ..core.errors import ExternalSolverPending, InputError, NonConvergenceError, NumericalError, PreconditionError
    from ..core.linalg import clip_eigenvalues, lambda_max, lambda_min, symmetrize
    from ..core.operators import apply_operator, stabilizability_probe
    from ..core.system import StochasticSystem
    from ..deployers.bundles import read_matrix, write_json, write_matrix
    from .gramians import lmi_quadratic_form
    from .lyapunov import solve_generalized_lyapunov
except ImportError:
    from core.config import SolverConfig
    from core.errors import ExternalSolverPending, InputError, NonConvergenceError, NumericalError, PreconditionError
    from core.linalg import clip_eigenvalues, lambda_max, lambda_min, symmetrize
    from core.operators import apply_operator, stabilizability_probe
    from core.system import StochasticSystem
    from deployers.bundles import read_matrix, write_json, write_matrix
    from solvers.gramians import lmi_quadratic_form
    from solvers.lyapunov import solve_generalized_lyapunov

logger = logging.getLogger(__name__)

# Absolute tolerance on λ_max of the inequality for an accepted P
FEASIBILITY_TOL = 1e-8


@dataclass
class ReachabilityDiagnostics:
    """How P was obtained and how well it satisfies the inequality."""
    strategy: str
    margin: float
    iterations: int
    lmi_value: float | None = None
    epsilon: float | None = None
    export_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "margin": self.margin,
            "iterations": self.iterations,
            "lmi_value": self.lmi_value,
            "epsilon": self.epsilon,
            "export_dir": self.export_dir,
        }


# =========================================================================
# LMI evaluation
# =========================================================================

def lmi_block(sys: StochasticSystem, X: np.ndarray) -> np.ndarray:
    """[AᵀX+XA+Π_N(X)−CᵀC, XB; BᵀX, −I], negative definite iff X⁻¹ is strictly feasible."""
    XB = X @ sys.B
    top = apply_operator(sys, X) - sys.C.T @ sys.C
    return symmetrize(np.block([[top, XB], [XB.T, -np.eye(sys.m)]]))


def _top_eigenpair(M: np.ndarray) -> tuple[float, np.ndarray]:
    w, V = linalg.eigh(M)
    return float(w[-1]), V[:, -1]


def lmi_value(sys: StochasticSystem, X: np.ndarray) -> tuple[float, np.ndarray]:
    """f(X) = λ_max of the block LMI and a subgradient in X-space."""
    n = sys.n
    f, v = _top_eigenpair(lmi_block(sys, X))
    v1, v2 = v[:n], v[n:]
    Bv2 = sys.B @ v2
    g = apply_operator(sys, np.outer(v1, v1), adjoint=True) + np.outer(v1, Bv2) + np.outer(Bv2, v1)
    return f, symmetrize(g)


def output_free_value(sys: StochasticSystem, X: np.ndarray) -> tuple[float, np.ndarray]:
    """λ_max(AᵀX+XA+Π_N(X)−CᵀC) and a subgradient (the LMI without its B-block)."""
    f, v = _top_eigenpair(apply_operator(sys, X) - sys.C.T @ sys.C)
    return f, apply_operator(sys, np.outer(v, v), adjoint=True)


def projected_subgradient(value_fn, X0: np.ndarray, margin: float, max_iter: int, clip: float) -> tuple[np.ndarray, float, int]:
    """
    Minimize a convex λ_max function over {X ⪰ clip·I} until it reaches −margin.

    Polyak steps toward the level −2·margin; projection by eigenvalue clipping.
    Returns the best iterate, its value and the number of steps taken.
    """
    target = -2.0 * margin
    X = clip_eigenvalues(X0, clip)
    f, g = value_fn(X)
    best_X, best_f = X, f
    for k in range(max_iter):
        if best_f <= -margin:
            return best_X, best_f, k
        g_norm2 = float(np.sum(g * g))
        if g_norm2 == 0.0:
            break
        X = clip_eigenvalues(X - ((f - target) / g_norm2) * g, clip)
        f, g = value_fn(X)
        if f < best_f:
            best_X, best_f = X, f
        if k % 500 == 0:
            logger.debug("Subgradient step %d: f = %.6e (best %.6e)", k, f, best_f)
    return best_X, best_f, max_iter


def _check_feasible(sys: StochasticSystem, X: np.ndarray) -> float:
    if lambda_min(X) <= 0:
        raise NumericalError("X = P^-1 is not positive definite")
    return lambda_max(lmi_quadratic_form(sys, X))


# =========================================================================
# Warm start from the dual stabilizability problem
# =========================================================================

def dual_lyapunov_point(sys: StochasticSystem, cfg: SolverConfig) -> np.ndarray:
    """
    X ≻ 0 with AᵀX + XA + Π_N(X) − CᵀC ≺ 0.

    A stabilizing gain F of the dual triple (Aᵀ, Cᵀ, N_iᵀ) makes
    (A + FᵀC, N) mean-square stable; Z solves its generalized Lyapunov
    equation with right-hand side I, and X = εZ for ε small enough.
    """
    probe = stabilizability_probe(sys.dual(), cfg)
    if not probe:
        raise NonConvergenceError("Dual system (Aᵀ, Cᵀ, Nᵀ) could not be stabilized; no feasible P exists")
    F = probe.F
    Z = solve_generalized_lyapunov(sys.replace(A=sys.A + F.T @ sys.C), np.eye(sys.n), cfg)

    FZ = F @ Z
    quadratic = lambda_max(FZ.T @ FZ)
    epsilon = 1.0 if quadratic <= 0 else min(1.0, 0.5 / quadratic)
    for _ in range(60):
        X = epsilon * Z
        if lambda_max(apply_operator(sys, X) - sys.C.T @ sys.C) < 0:
            return X
        epsilon *= 0.5
    raise NumericalError("Could not scale the dual Lyapunov point into the feasible set")


# =========================================================================
# Strategies
# =========================================================================

class ReachabilityStrategy(ABC):
    """Abstract base class for P-feasibility strategies."""
    name: str = ""

    @abstractmethod
    def solve(self, sys: StochasticSystem, cfg: SolverConfig) -> tuple[np.ndarray, ReachabilityDiagnostics]:
        """Return X = P⁻¹ and diagnostics."""
        pass


class ConstructiveEpsilonStrategy(ReachabilityStrategy):
    """ε-scaling of an output-free feasible point: P = (εX)⁻¹."""
    name = "constructive_epsilon"

    def output_free_point(self, sys: StochasticSystem, cfg: SolverConfig) -> tuple[np.ndarray, int]:
        X0 = dual_lyapunov_point(sys, cfg)
        X, f, steps = projected_subgradient(
            lambda Y: output_free_value(sys, Y), X0, cfg.lmi_margin, cfg.max_subgradient, cfg.psd_clip
        )
        if f >= 0:
            raise NonConvergenceError(f"Output-free inequality infeasible after {steps} steps (λ_max {f:.3e})", last_residual=f)
        return X, steps

    def scale(self, sys: StochasticSystem, X: np.ndarray) -> tuple[np.ndarray, float]:
        Y = -(apply_operator(sys, X) - sys.C.T @ sys.C)
        y_min = lambda_min(Y)
        if y_min <= 0:
            raise NumericalError(f"Internal error: Y is not positive definite (λ_min {y_min:.3e})")
        XB = X @ sys.B
        quadratic = lambda_max(XB @ XB.T) if sys.m else 0.0
        epsilon = 1.0 if quadratic <= 0 else min(1.0, (1 - 1e-6) * y_min / quadratic)
        if epsilon <= 0:
            raise NumericalError(f"Internal error: non-positive scaling ε = {epsilon}")
        return epsilon * X, epsilon

    def solve(self, sys, cfg):
        X, steps = self.output_free_point(sys, cfg)
        X, epsilon = self.scale(sys, X)
        f, _ = lmi_value(sys, X)
        margin = _check_feasible(sys, X)
        return X, ReachabilityDiagnostics(self.name, margin, steps, lmi_value=f, epsilon=epsilon)


class SubgradientFeasibilityStrategy(ReachabilityStrategy):
    """Projected subgradient descent of λ_max of the block LMI, then trace ascent."""
    name = "subgradient_feasibility"

    def solve(self, sys, cfg):
        constructive = ConstructiveEpsilonStrategy()
        X_free, warm_steps = constructive.output_free_point(sys, cfg)
        X0, _ = constructive.scale(sys, X_free)

        value = lambda Y: lmi_value(sys, Y)
        X, f, steps = projected_subgradient(value, X0, cfg.lmi_margin, cfg.max_subgradient, cfg.psd_clip)
        if f > -cfg.lmi_margin:
            raise NonConvergenceError(
                f"LMI margin not reached in {steps} subgradient steps (λ_max {f:.3e}); "
                "the dual system may not be stabilizable",
                last_residual=f,
            )
        X, f = self.trace_ascent(sys, X, f, cfg)
        margin = _check_feasible(sys, X)
        return X, ReachabilityDiagnostics(self.name, margin, warm_steps + steps, lmi_value=f)

    @staticmethod
    def trace_ascent(sys: StochasticSystem, X: np.ndarray, f: float, cfg: SolverConfig) -> tuple[np.ndarray, float]:
        """Enlarge tr(X) along I and along X while the LMI margin holds."""
        n = sys.n
        eta = {"identity": 0.5, "radial": 0.5}
        for _ in range(cfg.trace_steps):
            for direction in ("identity", "radial"):
                D = (np.trace(X) / n) * np.eye(n) if direction == "identity" else X
                X_try = X + eta[direction] * D
                f_try, _ = lmi_value(sys, X_try)
                if f_try <= -cfg.lmi_margin:
                    X, f = X_try, f_try
                    eta[direction] *= 2.0
                else:
                    eta[direction] *= 0.25
        logger.debug("Trace ascent: tr(X) = %.6e, f = %.6e", np.trace(X), f)
        return X, f


class ExternalSDPStrategy(ReachabilityStrategy):
    """
    Hands the LMI to an external SDP solver through files.

    First call writes the problem into cfg.external_dir and raises
    ExternalSolverPending; once the solver has written Xinv.mtx (the
    matrix X = P⁻¹) there, the next call validates and ingests it.
    """
    name = "external_sdp"
    solution_file = "Xinv.mtx"

    def solve(self, sys, cfg):
        if not cfg.external_dir:
            raise InputError("external_sdp strategy needs solver.external_dir")
        directory = Path(cfg.external_dir)
        solution = directory / self.solution_file
        if solution.exists():
            X = symmetrize(read_matrix(solution))
            if X.shape != (sys.n, sys.n):
                raise InputError(f"{solution} has shape {X.shape}, expected {(sys.n, sys.n)}")
            margin = _check_feasible(sys, X)
            if margin > FEASIBILITY_TOL:
                raise PreconditionError(f"External solution violates the inequality (λ_max {margin:.3e})")
            f, _ = lmi_value(sys, X)
            return X, ReachabilityDiagnostics(self.name, margin, 0, lmi_value=f, export_dir=str(directory))

        export_lmi(sys, directory, cfg)
        raise ExternalSolverPending(
            f"LMI exported to {directory}; write {self.solution_file} there and rerun",
            export_dir=directory,
        )


_STRATEGIES: dict[str, type[ReachabilityStrategy]] = {
    "subgradient_feasibility": SubgradientFeasibilityStrategy,
    "constructive_epsilon": ConstructiveEpsilonStrategy,
    "external_sdp": ExternalSDPStrategy,
}


def get_strategy(name: str) -> ReachabilityStrategy:
    """Factory function for reachability strategies."""
    if name not in _STRATEGIES:
        raise InputError(f"Unknown strategy: {name}. Available: {list(_STRATEGIES.keys())}")
    return _STRATEGIES[name]()


def solve_reachability_gramian(sys: StochasticSystem, cfg: SolverConfig | None = None,
                               strategy: str = "subgradient_feasibility") -> tuple[np.ndarray, ReachabilityDiagnostics]:
    """Feasible reachability Gramian P ≻ 0 and its diagnostics."""
    cfg = cfg or SolverConfig()
    X, diagnostics = get_strategy(strategy).solve(sys, cfg)
    if diagnostics.margin > FEASIBILITY_TOL:
        raise NonConvergenceError(
            f"P from {strategy} violates the inequality (λ_max {diagnostics.margin:.3e})",
            last_residual=diagnostics.margin,
        )
    P = symmetrize(np.linalg.inv(X))
    logger.info("Reachability Gramian via %s: margin %.3e, %d steps", strategy, diagnostics.margin, diagnostics.iterations)
    return P, diagnostics


# =========================================================================
# External solver files
# =========================================================================

def _lmi_operator_block(sys: StochasticSystem, E: np.ndarray) -> np.ndarray:
    EB = E @ sys.B
    return np.block([[apply_operator(sys, E), EB], [EB.T, np.zeros((sys.m, sys.m))]])


def export_lmi(sys: StochasticSystem, directory: Path, cfg: SolverConfig) -> Path:
    """
    Write the LMI in solver-neutral form.

    Files: system matrices (Matrix Market), lmi.json (block sizes, objective
    and template) and lmi.dat-s (SDPA sparse). SDPA convention:
    minimize cᵀx subject to Σ x_k F_k − F_0 ⪰ 0, with x the upper-triangular
    entries of X; block 1 is −F(X) − margin·I, block 2 is X − δI.
    """
    directory.mkdir(parents=True, exist_ok=True)
    n, m = sys.n, sys.m
    files = {"A": "A.mtx", "B": "B.mtx", "C": "C.mtx", "N": []}
    write_matrix(directory / "A.mtx", sys.A)
    write_matrix(directory / "B.mtx", sys.B)
    write_matrix(directory / "C.mtx", sys.C)
    for i, Ni in enumerate(sys.N):
        name = f"N{i + 1}.mtx"
        write_matrix(directory / name, Ni)
        files["N"].append(name)

    manifest = {
        "format": "lqgbt-lmi",
        "version": 1,
        "unknown": "X = P^-1, symmetric n x n",
        "lmi": "[A'X + XA + sum_ij k_ij N_i'XN_j - C'C, XB; B'X, -I] <= -margin*I",
        "constraint": "X >= delta*I",
        "objective": "maximize trace(X)",
        "block_sizes": [n + m, n],
        "margin": cfg.lmi_margin,
        "delta": cfg.psd_clip,
        "K": sys.K.tolist(),
        "files": files,
        "sdpa": "lmi.dat-s",
        "solution": ExternalSDPStrategy.solution_file,
    }
    write_json(directory / "lmi.json", manifest)

    rows, cols = np.triu_indices(n)
    lines = [
        '"LQG balancing reachability LMI, variables = upper triangle of X',
        str(rows.size),
        "2",
        f"{n + m} {n}",
        " ".join("-1" if i == j else "0" for i, j in zip(rows, cols)),
    ]

    def emit(matno: int, block: int, M: np.ndarray) -> None:
        for a, b in zip(*np.nonzero(np.triu(M))):
            lines.append(f"{matno} {block} {a + 1} {b + 1} {M[a, b]:.17g}")

    F0 = np.zeros((n + m, n + m))
    F0[:n, :n] = -sys.C.T @ sys.C
    F0[n:, n:] = -np.eye(m)
    emit(0, 1, F0 + cfg.lmi_margin * np.eye(n + m))
    emit(0, 2, cfg.psd_clip * np.eye(n))
    for k, (i, j) in enumerate(zip(rows, cols), start=1):
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        emit(k, 1, -_lmi_operator_block(sys, E))
        emit(k, 2, E)
    (directory / "lmi.dat-s").write_text("\n".join(lines) + "\n")
    logger.info("Exported reachability LMI (%d variables) to %s", rows.size, directory)
    return directory
