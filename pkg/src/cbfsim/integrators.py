"""Fixed-step integration used by the plant, the observer, and the Riccati solve."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import SimulationDivergedError


def rk4_step(deriv: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    """Advance ``x`` by one classical fourth-order Runge-Kutta step.

    Args:
        deriv: right-hand side, mapping a state vector to its time derivative.
        x: current state.
        dt: step length, must be positive.

    Returns:
        The state after one step of length ``dt``.

    Raises:
        ValueError: if ``dt`` is not positive.
        SimulationDivergedError: if the result is not finite.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(deriv(x), dtype=float)
    k2 = np.asarray(deriv(x + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(deriv(x + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(deriv(x + dt * k3), dtype=float)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationDivergedError("state became non-finite during an integration step")
    return out
