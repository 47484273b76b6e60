"""State observer and stationary observer-gain design.

The observer integrates a copy of the plant driven by the innovation,
``xhatdot = f(xhat, u) + K (y - h(xhat))``.  The gain comes from the
stationary Kalman filter of the linearized pair (A, C): the filter Riccati
differential equation is integrated to steady state and the gain is read off
the limit covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrators import rk4_step
from .models import PlantModel, _check_vec


class RiccatiConvergenceError(RuntimeError):
    """Riccati integration failed to settle; the (A, C) pair is likely not detectable."""


@dataclass(frozen=True)
class ObserverState:
    """Current estimate and the (fixed) innovation gain, shape (n_x, n_y)."""

    xhat: np.ndarray
    gain: np.ndarray


def residual(y, xhat, model: PlantModel) -> np.ndarray:
    """Innovation ``y - h(xhat)``."""
    y = _check_vec("y", y, model.n_y)
    xhat = _check_vec("xhat", xhat, model.n_x)
    return y - np.asarray(model.measure(xhat), dtype=float)


def observer_step(obs: ObserverState, model: PlantModel, u, y, dt: float) -> ObserverState:
    """One RK4 step of the correction dynamics ``f(xhat, u) + K (y - h(xhat))``.

    ``u`` and ``y`` are held over the step, and with them the innovation
    ``y - h(xhat)``, sampled at the step-start estimate.  Holding the sampled
    innovation rather than re-differencing ``y`` against moving integration
    stages keeps the discrete observer consistent with the continuous design:
    under perfect data the innovation is exactly zero and the estimate
    reproduces the plant flow bit for bit, instead of chasing its own
    step-start position.

    Raises:
        ValueError: on non-positive ``dt`` or dimension mismatch.
        SimulationDivergedError: if the new estimate is not finite.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = _check_vec("u", u, model.n_u)
    y = _check_vec("y", y, model.n_y)
    K = np.asarray(obs.gain, dtype=float)
    if K.shape != (model.n_x, model.n_y):
        raise ValueError(f"gain has shape {K.shape}, expected {(model.n_x, model.n_y)}")
    correction = K @ (y - np.asarray(model.measure(obs.xhat), dtype=float))

    def deriv(z):
        return (
            np.asarray(model.drift(z), dtype=float)
            + np.asarray(model.input_matrix(z), dtype=float) @ u
            + correction
        )

    xhat_new = rk4_step(deriv, obs.xhat, dt)
    return ObserverState(xhat=xhat_new, gain=obs.gain)


@dataclass(frozen=True)
class LinearPlantMatrices:
    """Linearized plant data for gain design.

    Q must be symmetric positive semidefinite, R symmetric positive definite.
    Detectability of (A, C) is not checked here; it shows up as divergence of
    the Riccati integration.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if Q.shape != (n, n):
            raise ValueError(f"Q has shape {Q.shape}, expected {(n, n)}")
        m = C.shape[0]
        if R.shape != (m, m):
            raise ValueError(f"R has shape {R.shape}, expected {(m, m)}")
        for name, M in (("Q", Q), ("R", R)):
            if np.max(np.abs(M - M.T)) > 1e-9 * max(1.0, np.max(np.abs(M))):
                raise ValueError(f"{name} must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


def care_residual(m: LinearPlantMatrices, P: np.ndarray) -> float:
    """Max abs entry of ``A P + P A' - P C' R^-1 C P + Q``."""
    Rinv = np.linalg.inv(m.R)
    S = m.C.T @ Rinv @ m.C
    return float(np.max(np.abs(m.A @ P + P @ m.A.T - P @ S @ P + m.Q)))


def stationary_kalman_gain(
    m: LinearPlantMatrices, tol: float = 1e-10, max_time: float = 1e4
) -> tuple[np.ndarray, np.ndarray]:
    """Stationary innovation gain from the filter Riccati equation.

    Integrates ``Pdot = A P + P A' - P C' R^-1 C P + Q`` from ``P(0) = Q``
    with RK4 until ``max |Pdot| < tol``, symmetrizing after each step.  The
    step length tracks a crude Lipschitz estimate of the right-hand side so
    the stiff early transient stays stable without a fixed tiny step.

    Returns:
        (K, P) with ``K = P C' R^-1``.

    Raises:
        RiccatiConvergenceError: no convergence within ``max_time`` model
            seconds (non-detectable pair, or divergent covariance).
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    Rinv = np.linalg.inv(m.R)
    S = m.C.T @ Rinv @ m.C
    norm_A = float(np.linalg.norm(m.A))
    norm_S = float(np.linalg.norm(S))

    def pdot(P):
        return m.A @ P + P @ m.A.T - P @ S @ P + m.Q

    P = m.Q.copy()
    t = 0.0
    max_iter = 1_000_000
    for _ in range(max_iter):
        dP = pdot(P)
        if not np.all(np.isfinite(dP)):
            raise RiccatiConvergenceError("Riccati derivative became non-finite")
        if float(np.max(np.abs(dP))) < tol:
            break
        if t >= max_time:
            raise RiccatiConvergenceError(
                f"Riccati integration did not settle within max_time={max_time}"
            )
        lip = 2.0 * norm_A + 2.0 * norm_S * float(np.linalg.norm(P))
        dt = min(0.1, 0.5 / max(lip, 1e-6))
        k1 = dP
        k2 = pdot(P + 0.5 * dt * k1)
        k3 = pdot(P + 0.5 * dt * k2)
        k4 = pdot(P + dt * k3)
        P = P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + P.T)
        t += dt
    else:
        raise RiccatiConvergenceError("Riccati integration exceeded the iteration budget")
    K = P @ m.C.T @ Rinv
    res = care_residual(m, P)
    if res > 10.0 * tol:
        raise RiccatiConvergenceError(
            f"Riccati settled but the stationary residual {res:g} exceeds {10.0 * tol:g}"
        )
    return K, P
