"""
Generalized Lyapunov operators of a stochastic system.

    (L_A + Π_N)(X)   = AᵀX + XA + Σ_ij k_ij N_iᵀ X N_j
    (L_A + Π_N)*(X)  = AX + XAᵀ + Σ_ij k_ij N_i X N_jᵀ

plus their Kronecker matricizations, the mean-square stability test and
the Hautus-type observability/detectability tests.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import CapacityError, InputError, NumericalError, NonConvergenceError, PreconditionError, CertificateError
from .linalg import symmetrize, restrict_to_symmetric, unvech
from .system import StochasticSystem

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 150


@dataclass
class OperatorMatricization:
    """Column-major Kronecker representation: M @ vec(X) = vec(op(X))."""
    M: np.ndarray
    adjoint: bool

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.M.shape[0])))

    def apply(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        return (self.M @ X.reshape(-1, order="F")).reshape(n, n, order="F")


@dataclass
class SpectralCertificate:
    """Spectral abscissa of L_A + Π_N with the eigenvalue attaining it."""
    abscissa: float
    witness_eigenvalue: complex
    stable: bool

    def to_dict(self) -> dict:
        return {
            "abscissa": self.abscissa,
            "witness_eigenvalue": [self.witness_eigenvalue.real, self.witness_eigenvalue.imag],
            "stable": self.stable,
        }


@dataclass
class HautusWitness:
    eigenvalue: complex
    V: np.ndarray


@dataclass
class HautusResult:
    """Outcome of a Hautus-type test; a failed test carries its witness."""
    holds: bool
    witness: HautusWitness | None = None
    eigenvalues_scanned: int = 0

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        data = {"holds": self.holds, "eigenvalues_scanned": self.eigenvalues_scanned}
        if self.witness is not None:
            lam = self.witness.eigenvalue
            data["witness"] = {"eigenvalue": [lam.real, lam.imag], "V": self.witness.V.tolist()}
        return data


@dataclass
class ProbeResult:
    stabilizable: bool
    F: np.ndarray | None = None
    certificate: SpectralCertificate | None = None

    def __bool__(self) -> bool:
        return self.stabilizable


def _check_square(sys: StochasticSystem, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (sys.n, sys.n):
        raise InputError(f"X has shape {X.shape}, system dimension is {sys.n}")
    return X


def noise_term(N: list[np.ndarray], K: np.ndarray, X: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Π_N(X) = Σ k_ij N_iᵀ X N_j, or Π_N*(X) = Σ k_ij N_i X N_jᵀ."""
    out = np.zeros_like(X, dtype=float)
    for i, Ni in enumerate(N):
        left = Ni @ X if adjoint else Ni.T @ X
        for j, Nj in enumerate(N):
            kij = K[i, j]
            if kij == 0.0:
                continue
            out += kij * (left @ (Nj.T if adjoint else Nj))
    return out


def apply_operator(sys: StochasticSystem, X: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Apply L_A + Π_N (or its adjoint) to a symmetric matrix."""
    X = _check_square(sys, X)
    A = sys.A
    if adjoint:
        out = A @ X + X @ A.T
    else:
        out = A.T @ X + X @ A
    out = out + noise_term(sys.N, sys.K, X, adjoint)
    return symmetrize(out)


def _check_budget(n: int, max_dim: int) -> None:
    if n > max_dim:
        raise CapacityError(f"n={n} exceeds the dense matricization budget (n <= {max_dim})")


def matricize(sys: StochasticSystem, adjoint: bool = False, max_dim: int = DEFAULT_MAX_DIM) -> OperatorMatricization:
    """Kronecker form of L_A + Π_N acting on column-major vec(X)."""
    n = sys.n
    _check_budget(n, max_dim)
    I = np.eye(n)
    A = sys.A if adjoint else sys.A.T
    M = np.kron(I, A) + np.kron(A, I)
    for i, Ni in enumerate(sys.N):
        for j, Nj in enumerate(sys.N):
            kij = sys.K[i, j]
            if kij == 0.0:
                continue
            # vec(L X R) = (Rᵀ ⊗ L) vec(X)
            M += kij * (np.kron(Nj, Ni) if adjoint else np.kron(Nj.T, Ni.T))
    return OperatorMatricization(M=M, adjoint=adjoint)


def symmetric_matricization(sys: StochasticSystem, adjoint: bool = False, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Matricization restricted to half-vectorized symmetric matrices."""
    return restrict_to_symmetric(matricize(sys, adjoint, max_dim).M, sys.n)


def mean_square_stability(sys: StochasticSystem, max_dim: int = DEFAULT_MAX_DIM) -> SpectralCertificate:
    """
    Spectral abscissa of L_A + Π_N.

    The operator is resolvent positive, so the abscissa is attained on the
    symmetric subspace and the restricted (smaller) eigenproblem suffices.
    """
    Ms = symmetric_matricization(sys, max_dim=max_dim)
    try:
        eigenvalues = linalg.eigvals(Ms)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolver failed on the generalized Lyapunov operator: {e}")
    k = int(np.argmax(eigenvalues.real))
    abscissa = float(eigenvalues[k].real)
    logger.debug("Spectral abscissa %.6e (n=%d)", abscissa, sys.n)
    return SpectralCertificate(abscissa=abscissa, witness_eigenvalue=complex(eigenvalues[k]), stable=abscissa < 0)


def _real_symmetric(v: np.ndarray, n: int) -> list[np.ndarray]:
    """Real and imaginary parts of a phase-normalized eigenvector as symmetric matrices."""
    pivot = np.argmax(np.abs(v))
    v = v * (np.conj(v[pivot]) / np.abs(v[pivot]))
    parts = []
    for part in (v.real, v.imag):
        if np.linalg.norm(part) > 1e-8 * np.linalg.norm(v):
            parts.append(unvech(part, n))
    return parts


def _cone_witness(V: np.ndarray, C: np.ndarray, tol: float) -> np.ndarray | None:
    """Return V (trace-normalized sign) if it is PSD and annihilated by C."""
    if np.trace(V) < 0:
        V = -V
    w = linalg.eigvalsh(V)
    norm = max(abs(w[0]), abs(w[-1]))
    if norm == 0.0 or w[0] < -tol * norm:
        return None
    if np.linalg.norm(C @ V) <= tol * np.linalg.norm(C) * norm:
        return V / norm
    return None


def _clusters(eigenvalues: np.ndarray, indices: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for k in sorted(indices, key=lambda k: (eigenvalues[k].real, eigenvalues[k].imag)):
        for group in groups:
            if abs(eigenvalues[group[0]] - eigenvalues[k]) <= tol:
                group.append(k)
                break
        else:
            groups.append([k])
    return groups


def _hautus(sys: StochasticSystem, tol: float, scan_all: bool, samples: int, seed: int, max_dim: int) -> HautusResult:
    n = sys.n
    Ms = symmetric_matricization(sys, adjoint=True, max_dim=max_dim)
    try:
        eigenvalues, vectors = linalg.eig(Ms)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolver failed in Hautus test: {e}")

    if scan_all:
        candidates = np.arange(eigenvalues.size)
    else:
        candidates = np.flatnonzero(eigenvalues.real >= -tol)

    scale = max(1.0, float(np.abs(eigenvalues).max()))
    rng = np.random.default_rng(seed)
    for group in _clusters(eigenvalues, candidates, 1e-7 * scale):
        basis = []
        for k in group:
            basis.extend(_real_symmetric(vectors[:, k], n))
        basis = [V if np.trace(V) >= 0 else -V for V in basis]
        trials = list(basis)
        if len(basis) > 1:
            for weights in rng.dirichlet(np.ones(len(basis)), size=samples):
                trials.append(sum(w * V for w, V in zip(weights, basis)))
        for V in trials:
            witness = _cone_witness(V, sys.C, tol)
            if witness is not None:
                lam = complex(eigenvalues[group[0]])
                logger.info("Hautus witness found: eigenvalue %.6g%+.6gj", lam.real, lam.imag)
                return HautusResult(holds=False, witness=HautusWitness(lam, witness), eigenvalues_scanned=len(candidates))

    return HautusResult(holds=True, eigenvalues_scanned=len(candidates))


def hautus_detectability(sys: StochasticSystem, tol: float = 1e-8, samples: int = 17, seed: int = 0,
                         max_dim: int = DEFAULT_MAX_DIM) -> HautusResult:
    """Detectable iff no eigenvalue with Re λ ≥ 0 has a PSD eigenvector V with CV = 0."""
    return _hautus(sys, tol, scan_all=False, samples=samples, seed=seed, max_dim=max_dim)


def hautus_observability(sys: StochasticSystem, tol: float = 1e-8, samples: int = 17, seed: int = 0,
                         max_dim: int = DEFAULT_MAX_DIM) -> HautusResult:
    """Observable iff no eigenvalue at all has a PSD eigenvector V with CV = 0."""
    return _hautus(sys, tol, scan_all=True, samples=samples, seed=seed, max_dim=max_dim)


def stabilizability_probe(sys: StochasticSystem, cfg=None) -> ProbeResult:
    """
    Semi-decision procedure for stabilizability of (A, B, N_i).

    Runs the observability Gramian iteration with output I (always
    observable). Convergence yields F = -BᵀQ̃, whose closed loop is then
    certified; any failure is reported as "not stabilizable".
    """
    try:
        from ..solvers.gramians import solve_observability_gramian
    except ImportError:
        from solvers.gramians import solve_observability_gramian

    probe = sys.replace(C=np.eye(sys.n))
    try:
        Q, _ = solve_observability_gramian(probe, cfg)
    except (NonConvergenceError, NumericalError, PreconditionError, CertificateError) as e:
        logger.info("Stabilizability probe failed: %s", e)
        return ProbeResult(stabilizable=False)

    F = -sys.B.T @ Q
    certificate = mean_square_stability(sys.replace(A=sys.A + sys.B @ F))
    if not certificate.stable:
        return ProbeResult(stabilizable=False, certificate=certificate)
    return ProbeResult(stabilizable=True, F=F, certificate=certificate)
