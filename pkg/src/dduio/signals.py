"""Deterministic scalar signal generators for inputs and disturbances.

Every generator is a pure function of time given its parameters (and
seed, for the random kind), so repeated evaluation in any order yields
identical values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SignalGenerator:
    """Scalar signal evaluable at arbitrary nonnegative times."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def sample(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.value(float(t)) for t in np.asarray(ts)])


@dataclass(frozen=True)
class Zero(SignalGenerator):
    def value(self, t: float) -> float:
        return 0.0

    def sample(self, ts: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(ts).shape)


@dataclass(frozen=True)
class Sinusoid(SignalGenerator):
    """amplitude * cos(frequency * t + phase)"""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def value(self, t: float) -> float:
        return self.amplitude * np.cos(self.frequency * t + self.phase)

    def sample(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return self.amplitude * np.cos(self.frequency * ts + self.phase)


class AutonomousLinear(SignalGenerator):
    """One component of the autonomous system s' = T s, s(0) = s0.

    Evaluation uses the eigendecomposition of ``T``; the transition
    matrix must be diagonalizable (always true for the scalar case).
    """

    def __init__(self, transition, initial, component: int = 0):
        self.transition = np.atleast_2d(np.asarray(transition, dtype=float))
        self.initial = np.atleast_1d(np.asarray(initial, dtype=float))
        self.component = component
        if self.transition.shape[0] != self.transition.shape[1]:
            raise ValueError("transition matrix must be square")
        if self.initial.shape[0] != self.transition.shape[0]:
            raise ValueError("initial value length must match transition size")
        lam, vec = np.linalg.eig(self.transition)
        self._lam = lam
        self._modes = vec[component, :] * np.linalg.solve(vec, self.initial.astype(complex))

    def value(self, t: float) -> float:
        return float(np.real(np.sum(self._modes * np.exp(self._lam * t))))

    def sample(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.real(np.exp(np.outer(ts, self._lam)) @ self._modes)


@dataclass
class PiecewiseConstantRandom(SignalGenerator):
    """Uniform random value in [low, high], held for ``hold`` seconds.

    The k-th held value depends only on (seed, k), so evaluation order
    does not matter.
    """

    low: float
    high: float
    hold: float
    seed: object
    _values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)
    _rng: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.hold <= 0:
            raise ValueError("hold interval must be positive")
        self._rng = np.random.default_rng(self.seed)

    def _index(self, t: float) -> int:
        # Nudge guards against sample times landing epsilon below a boundary.
        k = int(np.floor(t / self.hold * (1.0 + 1e-12) + 1e-9))
        return max(k, 0)

    def _ensure(self, k: int) -> None:
        if k >= self._values.size:
            extra = self._rng.uniform(self.low, self.high, size=max(256, k + 1 - self._values.size))
            self._values = np.concatenate([self._values, extra])

    def value(self, t: float) -> float:
        k = self._index(t)
        self._ensure(k)
        return float(self._values[k])

    def sample(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        idx = np.array([self._index(float(t)) for t in ts])
        if idx.size:
            self._ensure(int(idx.max()))
        return self._values[idx]


def stack_values(generators, t: float) -> np.ndarray:
    """Evaluate a list of generators at one instant."""
    return np.array([g.value(t) for g in generators])
