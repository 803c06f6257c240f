"""Small dense linear-algebra helpers used across the package."""

import numpy as np
from scipy import linalg


def symmetrize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def ordered_eigh(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Symmetric eigendecomposition with descending eigenvalues.

    Each eigenvector is sign-normalized so that its largest-magnitude
    entry is positive, which makes the output reproducible.
    """
    w, V = linalg.eigh(symmetrize(M))
    w = w[::-1]
    V = V[:, ::-1].copy()
    for k in range(V.shape[1]):
        pivot = np.argmax(np.abs(V[:, k]))
        if V[pivot, k] < 0:
            V[:, k] = -V[:, k]
    return w, V


def lambda_max(M: np.ndarray) -> float:
    return float(linalg.eigvalsh(symmetrize(M))[-1])


def lambda_min(M: np.ndarray) -> float:
    return float(linalg.eigvalsh(symmetrize(M))[0])


def spectral_norm_sq(M: np.ndarray) -> float:
    """Squared spectral norm ‖M‖₂² computed as λ_max(MᵀM)."""
    if M.size == 0:
        return 0.0
    return max(lambda_max(M.T @ M), 0.0)


def clip_eigenvalues(X: np.ndarray, floor: float) -> np.ndarray:
    """Projection of a symmetric matrix onto {X ⪰ floor·I}."""
    w, V = linalg.eigh(symmetrize(X))
    return symmetrize((V * np.maximum(w, floor)) @ V.T)


def psd_factor(K: np.ndarray) -> np.ndarray:
    """
    Return F with F Fᵀ = K for a PSD matrix K.

    Uses Cholesky when possible, otherwise an eigendecomposition with
    negative eigenvalues clipped at zero.
    """
    try:
        return linalg.cholesky(K, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(symmetrize(K))
        return V * np.sqrt(np.maximum(w, 0.0))


# Half vectorization: vech stacks the lower triangle column by column.

def vech_indices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (rows, cols, lower, upper) for the lower triangle of an n×n matrix.

    ``lower``/``upper`` are the column-major positions of (i, j) and (j, i).
    """
    cols, rows = np.triu_indices(n)
    # triu_indices on (col, row) enumerates the lower triangle column by column
    lower = rows + cols * n
    upper = cols + rows * n
    return rows, cols, lower, upper


def vech(X: np.ndarray) -> np.ndarray:
    rows, cols, _, _ = vech_indices(X.shape[0])
    return X[rows, cols]


def unvech(v: np.ndarray, n: int) -> np.ndarray:
    rows, cols, _, _ = vech_indices(n)
    X = np.zeros((n, n), dtype=v.dtype)
    X[rows, cols] = v
    X[cols, rows] = v
    return X


def restrict_to_symmetric(M: np.ndarray, n: int) -> np.ndarray:
    """Restrict a column-major n²×n² operator matrix to vech coordinates.

    The operator must map symmetric matrices to symmetric matrices.
    """
    _, _, lower, upper = vech_indices(n)
    MD = M[:, lower] + M[:, upper]
    diagonal = lower == upper
    MD[:, diagonal] = M[:, lower[diagonal]]
    return MD[lower, :]
