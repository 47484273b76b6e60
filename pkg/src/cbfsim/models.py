"""Plant models and safe-set descriptions.

A plant is control-affine, ``xdot = f0(x) + G(x) u``, with a measurement map
``y = h(x)``.  A safe set is the superlevel set of a margin function together
with a strengthening function alpha and a box of admissible controls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Vec = np.ndarray


def _check_vec(name: str, v, length: int) -> Vec:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ValueError(f"{name} has shape {np.shape(v)}, expected a vector of length {length}")
    return arr


@dataclass(frozen=True)
class PlantModel:
    """Control-affine plant with a measurement map.

    Attributes:
        n_x, n_u, n_y: state, control, and measurement dimensions.
        drift: ``x -> f0(x)``, the unforced part of the dynamics.
        input_matrix: ``x -> G(x)``, shape (n_x, n_u).
        measure: ``x -> h(x)``, shape (n_y,).
    """

    n_x: int
    n_u: int
    n_y: int
    drift: Callable[[Vec], Vec]
    input_matrix: Callable[[Vec], np.ndarray]
    measure: Callable[[Vec], Vec]

    def __post_init__(self):
        for name in ("n_x", "n_u", "n_y"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class SafeSetSpec:
    """Safe set ``{x : margin(x) >= 0}`` plus control box and strengthening.

    ``alpha`` must be extended class-K on the sampled range: zero at zero and
    strictly increasing.  ``admissible_state`` describes the operating region
    the margin is designed to protect (used for reporting, not enforcement).
    """

    margin: Callable[[Vec], float]
    gradient: Callable[[Vec], Vec]
    alpha: Callable[[float], float]
    admissible_state: Callable[[Vec], bool]
    control_lower: Vec = field(default_factory=lambda: np.array([-1.0]))
    control_upper: Vec = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.control_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.control_upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError(
                f"control bounds disagree in shape: {lo.shape} vs {hi.shape}"
            )
        if np.any(lo > hi):
            raise ValueError("control_lower must not exceed control_upper componentwise")
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)


def eval_dynamics(model: PlantModel, x, u) -> Vec:
    """``f(x, u) = f0(x) + G(x) u`` with dimension checking."""
    x = _check_vec("x", x, model.n_x)
    u = _check_vec("u", u, model.n_u)
    f0 = _check_vec("drift(x)", model.drift(x), model.n_x)
    G = np.asarray(model.input_matrix(x), dtype=float)
    if G.shape != (model.n_x, model.n_u):
        raise ValueError(
            f"input_matrix(x) has shape {G.shape}, expected {(model.n_x, model.n_u)}"
        )
    return f0 + G @ u


def eval_measurement(model: PlantModel, x) -> Vec:
    """``h(x)`` with dimension checking."""
    x = _check_vec("x", x, model.n_x)
    return _check_vec("measure(x)", model.measure(x), model.n_y)


def eval_safety_margin(s: SafeSetSpec, x) -> float:
    return float(s.margin(np.asarray(x, dtype=float)))


def eval_safety_gradient(s: SafeSetSpec, x) -> Vec:
    return np.atleast_1d(np.asarray(s.gradient(np.asarray(x, dtype=float)), dtype=float))


def check_gradient_fd(s: SafeSetSpec, x, step: float = 1e-5) -> float:
    """Max abs difference between the declared gradient and central differences.

    Raises:
        ValueError: if ``step`` is not positive.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.asarray(x, dtype=float)
    g = eval_safety_gradient(s, x)
    fd = np.empty_like(g)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (s.margin(x + e) - s.margin(x - e)) / (2.0 * step)
    return float(np.max(np.abs(g - fd)))


def validate_alpha(alpha: Callable[[float], float], grid=None) -> None:
    """Reject strengthening functions that are not class-K on a sample grid."""
    if grid is None:
        grid = np.linspace(-2.0, 2.0, 41)
    if abs(alpha(0.0)) > 1e-12:
        raise ValueError(f"alpha(0) must be 0, got {alpha(0.0)}")
    vals = [alpha(float(s)) for s in grid]
    for a, b in zip(vals, vals[1:]):
        if not b > a:
            raise ValueError("alpha must be strictly increasing on the sample grid")


class MeasurementVariant(enum.Enum):
    FULL_STATE = "FullState"
    POSITION_ONLY = "PositionOnly"


def _di_drift(x):
    return np.array([x[1], 0.0])


def _di_input_matrix(x):
    return np.array([[0.0], [1.0]])


def _di_measure_full(x):
    return np.array([x[0], x[1]])


def _di_measure_position(x):
    return np.array([x[0]])


def _di_margin(x):
    return -2.0 * x[0] - x[1] * x[1]


def _di_gradient(x):
    return np.array([-2.0, -2.0 * x[1]])


def _di_alpha(s):
    return 2.0 * s


def _di_admissible(x):
    return bool(x[0] <= 0.0)


def make_double_integrator_scenario(
    variant: MeasurementVariant = MeasurementVariant.FULL_STATE,
) -> tuple[PlantModel, SafeSetSpec]:
    """Double integrator kept left of the origin by a parabolic margin.

    Dynamics ``x1dot = x2``, ``x2dot = u`` with ``|u| <= 1``.  The admissible
    region is ``x1 <= 0``; the margin ``-2 x1 - x2^2`` additionally excludes
    velocities too high to brake in time, and its superlevel set is rendered
    invariant through ``alpha(s) = 2 s``.  The measurement is either the full
    state or the position alone.
    """
    if variant is MeasurementVariant.FULL_STATE:
        n_y, measure = 2, _di_measure_full
    elif variant is MeasurementVariant.POSITION_ONLY:
        n_y, measure = 1, _di_measure_position
    else:
        raise ValueError(f"unknown measurement variant: {variant!r}")
    model = PlantModel(
        n_x=2,
        n_u=1,
        n_y=n_y,
        drift=_di_drift,
        input_matrix=_di_input_matrix,
        measure=measure,
    )
    spec = SafeSetSpec(
        margin=_di_margin,
        gradient=_di_gradient,
        alpha=_di_alpha,
        admissible_state=_di_admissible,
        control_lower=np.array([-1.0]),
        control_upper=np.array([1.0]),
    )
    validate_alpha(spec.alpha)
    return model, spec


def double_integrator_linearization(
    variant: MeasurementVariant,
) -> tuple[np.ndarray, np.ndarray]:
    """(A, C) pair of the double integrator for observer-gain design."""
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    if variant is MeasurementVariant.FULL_STATE:
        C = np.eye(2)
    else:
        C = np.array([[1.0, 0.0]])
    return A, C
