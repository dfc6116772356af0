"""Fixed-step classical Runge-Kutta integration of forced linear ODEs."""
from __future__ import annotations

import numpy as np

from .errors import DivergenceError
from .signals import stack_values

DIVERGENCE_LIMIT = 1e12


def rk4_linear(a: np.ndarray, g: np.ndarray, generators, x0: np.ndarray,
               n_steps: int, dt: float, divergence_limit: float = DIVERGENCE_LIMIT) -> np.ndarray:
    """Integrate x' = a x + g s(t) with s(t) stacked from ``generators``.

    Returns states at the n_steps + 1 grid points j * dt.  Forcing is
    evaluated at the stage times (t, t + dt/2, t + dt), so smooth signals
    retain the full fourth-order accuracy of the method.
    """
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    forced = g.size > 0 and len(generators) > 0
    half = 0.5 * dt
    sixth = dt / 6.0
    for j in range(n_steps):
        t0 = j * dt
        if forced:
            f0 = g @ stack_values(generators, t0)
            fh = g @ stack_values(generators, t0 + half)
            f1 = g @ stack_values(generators, t0 + dt)
        else:
            f0 = fh = f1 = 0.0
        k1 = a @ x + f0
        k2 = a @ (x + half * k1) + fh
        k3 = a @ (x + half * k2) + fh
        k4 = a @ (x + dt * k3) + f1
        x = x + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        m = np.abs(x).max()
        if not (m < divergence_limit):
            raise DivergenceError(
                f"state magnitude {m!r} exceeded {divergence_limit:g} at t={t0 + dt:.6g}",
                t=t0 + dt)
        out[j + 1] = x
    return out
