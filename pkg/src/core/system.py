"""
StochasticSystem - coefficient matrices of a linear controlled SDE

    dx = (A x + B u) dt + Σ_i N_i x dW_i,    y = C x,

driven by a q-dimensional Wiener process with covariance K.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg

from .errors import InputError


def _as_matrix(value, name: str) -> np.ndarray:
    M = np.array(value, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise InputError(f"{name} must be a matrix, got array of dimension {M.ndim}")
    return M


@dataclass
class StochasticSystem:
    """Linear stochastic system with multiplicative noise."""
    A: np.ndarray
    N: list[np.ndarray]
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise InputError(f"A must be square, got shape {self.A.shape}")
        self.N = [_as_matrix(Ni, f"N{i + 1}") for i, Ni in enumerate(self.N)]
        for i, Ni in enumerate(self.N):
            if Ni.shape != (n, n):
                raise InputError(f"N{i + 1} has shape {Ni.shape}, expected {(n, n)}")
        self.B = self._input_matrix(self.B, n)
        self.C = self._output_matrix(self.C, n)
        q = len(self.N)
        K = np.array(self.K, dtype=float)
        if K.size != q * q:
            raise InputError(f"K must be {q}x{q} for {q} noise matrices, got {K.size} entries")
        self.K = K.reshape(q, q)
        self._check_covariance()

    @staticmethod
    def _input_matrix(value, n: int) -> np.ndarray:
        B = np.array(value, dtype=float)
        if B.size == 0:
            return np.zeros((n, 0))
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[0] != n:
            raise InputError(f"B must have {n} rows, got shape {B.shape}")
        return B

    @staticmethod
    def _output_matrix(value, n: int) -> np.ndarray:
        C = np.array(value, dtype=float)
        if C.size == 0:
            return np.zeros((0, n))
        if C.ndim == 1:
            C = C.reshape(1, -1)
        if C.ndim != 2 or C.shape[1] != n:
            raise InputError(f"C must have {n} columns, got shape {C.shape}")
        return C

    def _check_covariance(self) -> None:
        if self.K.size == 0:
            return
        scale = max(np.abs(self.K).max(), 1.0)
        if np.abs(self.K - self.K.T).max() > 1e-12 * scale:
            raise InputError("Wiener covariance K is not symmetric")
        smallest = linalg.eigvalsh(0.5 * (self.K + self.K.T))[0]
        if smallest < -1e-12 * np.linalg.norm(self.K, 2):
            raise InputError(f"Wiener covariance K is not positive semidefinite (eigenvalue {smallest:.3e})")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return len(self.N)

    def replace(self, **changes) -> "StochasticSystem":
        """Copy with some coefficients replaced (N and K kept unless given)."""
        values = {
            "A": self.A, "N": self.N, "B": self.B, "C": self.C,
            "K": self.K, "metadata": dict(self.metadata),
        }
        values.update(changes)
        return StochasticSystem(**values)

    def dual(self) -> "StochasticSystem":
        """The dual triple (Aᵀ, Cᵀ, N_iᵀ) with output identity, used for stabilizability of the dual."""
        return StochasticSystem(
            A=self.A.T,
            N=[Ni.T for Ni in self.N],
            B=self.C.T,
            C=np.eye(self.n),
            K=self.K,
        )

    def transformed(self, T: np.ndarray, T_inv: np.ndarray) -> "StochasticSystem":
        """State-space transformation x̃ = T x."""
        return StochasticSystem(
            A=T @ self.A @ T_inv,
            N=[T @ Ni @ T_inv for Ni in self.N],
            B=T @ self.B,
            C=self.C @ T_inv,
            K=self.K,
            metadata=dict(self.metadata),
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "p": self.p, "q": self.q,
            "metadata": self.metadata,
        }


def scalar_system(a: float, b: float = 0.0, c: float = 0.0, n1: float = 0.0, k: float = 1.0) -> StochasticSystem:
    """One-dimensional system with a single noise channel."""
    return StochasticSystem(A=[[a]], N=[[[n1]]], B=[[b]], C=[[c]], K=[[k]])
