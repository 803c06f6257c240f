"""
Control specifications: zero input, deterministic open-loop input, or
linear state feedback u = F x + u¹ with a deterministic offset u¹.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

try:
    from ..core.errors import InputError
    from ..core.system import StochasticSystem
except ImportError:
    from core.errors import InputError
    from core.system import StochasticSystem


Signal = Callable[[np.ndarray], np.ndarray] | np.ndarray


class ControlKind(Enum):
    ZERO = "zero"
    OPEN_LOOP = "open_loop"
    FEEDBACK = "feedback"


@dataclass
class ControlSpec:
    kind: ControlKind
    signal: Signal | None = None
    gain: np.ndarray | None = None

    @classmethod
    def zero(cls) -> "ControlSpec":
        return cls(ControlKind.ZERO)

    @classmethod
    def open_loop(cls, signal: Signal) -> "ControlSpec":
        return cls(ControlKind.OPEN_LOOP, signal=signal)

    @classmethod
    def feedback(cls, gain: np.ndarray, offset: Signal | None = None) -> "ControlSpec":
        return cls(ControlKind.FEEDBACK, signal=offset, gain=np.atleast_2d(np.asarray(gain, dtype=float)))

    def offset_on_grid(self, t: np.ndarray, m: int) -> np.ndarray:
        """Deterministic input component sampled on the grid, shape (len(t), m)."""
        if self.signal is None or self.kind == ControlKind.ZERO:
            return np.zeros((t.size, m))
        if callable(self.signal):
            values = np.asarray(self.signal(t), dtype=float)
        else:
            values = np.asarray(self.signal, dtype=float)
        if values.ndim == 0:
            values = np.full((t.size, m), float(values))
        elif values.ndim == 1 and values.size == t.size:
            values = values[:, None]
        elif values.ndim == 1 and values.size == m:
            values = np.broadcast_to(values, (t.size, m))
        if values.shape != (t.size, m):
            raise InputError(f"Control signal has shape {values.shape}, expected {(t.size, m)}")
        return values

    def closed_drift(self, sys: StochasticSystem) -> np.ndarray:
        """A + BF for feedback, A otherwise."""
        if self.kind != ControlKind.FEEDBACK:
            return sys.A
        if self.gain.shape != (sys.m, sys.n):
            raise InputError(f"Feedback gain has shape {self.gain.shape}, expected {(sys.m, sys.n)}")
        return sys.A + sys.B @ self.gain

    def input_gain(self, sys: StochasticSystem) -> np.ndarray:
        """F such that u = F x + offset (zero matrix without feedback)."""
        if self.kind == ControlKind.FEEDBACK:
            return self.gain
        return np.zeros((sys.m, sys.n))
