"""Stealthy measurement falsification against an observer-driven safety filter.

All policies inject measurements inside the detector's stealth ball of radius
delta around the expected measurement h(xhat), so a plain magnitude check on
the innovation never fires.  The gradient policies pick the point of the ball
that maximally inflates the perceived safety margin rate; the random policy
draws the offset direction uniformly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .models import (
    PlantModel,
    SafeSetSpec,
    eval_dynamics,
    eval_measurement,
    eval_safety_gradient,
    eval_safety_margin,
)
from .norms import Norm, dual_norm_value, norm_value

# Below this the attack direction is numerically meaningless.
DEGENERATE_TOL = 1e-12


class AttackMode(enum.Enum):
    NONE = "None"
    RANDOM = "Random"
    GRADIENT = "Gradient"


class DegenerateDirectionError(ValueError):
    """The gain-weighted margin gradient vanished; no attack direction exists."""


@dataclass(frozen=True)
class AttackConfig:
    """Attack policy selection.

    ``gamma`` arms the attack only while the perceived margin is below it;
    +inf means always armed.  ``seed`` feeds the random policy's generator.
    """

    mode: AttackMode = AttackMode.NONE
    norm: Norm = Norm.L2
    delta: float = 1e-3
    gamma: float = math.inf
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class AttackOutcome:
    """Injected measurement, whether an offset was injected, and its size."""

    y_injected: np.ndarray
    active: bool
    offset_norm: float


def _gain_weighted_gradient(xhat, K, model: PlantModel, s: SafeSetSpec) -> np.ndarray:
    g = eval_safety_gradient(s, xhat)
    return np.asarray(K, dtype=float).T @ g


def attack_l2(xhat, K, model: PlantModel, s: SafeSetSpec, delta: float) -> np.ndarray:
    """L2-ball maximizer: offset delta along the normalized K' grad direction."""
    c = _gain_weighted_gradient(xhat, K, model, s)
    n = float(np.sqrt(np.dot(c, c)))
    if n <= DEGENERATE_TOL:
        raise DegenerateDirectionError(
            f"gain-weighted gradient norm {n:g} is below {DEGENERATE_TOL:g}"
        )
    return eval_measurement(model, xhat) + delta * (c / n)


def attack_linf(xhat, K, model: PlantModel, s: SafeSetSpec, delta: float) -> np.ndarray:
    """Linf-ball maximizer: offset delta times the componentwise sign.

    Components with a zero coefficient stay unperturbed (sign 0): they do not
    affect the perceived margin rate, so moving them only risks detection.
    """
    c = _gain_weighted_gradient(xhat, K, model, s)
    return eval_measurement(model, xhat) + delta * np.sign(c)


def attack_random(xhat, model: PlantModel, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Offset of size exactly delta in a uniformly random direction."""
    while True:
        e = rng.standard_normal(model.n_y)
        n = float(np.sqrt(np.dot(e, e)))
        if n > DEGENERATE_TOL:
            break
    return eval_measurement(model, xhat) + delta * (e / n)


def attack_numeric(
    xhat, K, model: PlantModel, s: SafeSetSpec, delta: float, norm: Norm
) -> np.ndarray:
    """Independent numerical maximizer used to cross-check the closed forms.

    Treats the perceived-rate objective ``y -> grad(xhat) . K y`` as a black
    box: its coefficients come from central differences, never from the
    closed-form algebra.  The L2 case runs projected gradient ascent on the
    stealth ball from h(xhat) to a 1e-12 step-change tolerance; the Linf case
    takes componentwise signs of the differenced coefficients.
    """
    h0 = eval_measurement(model, xhat)
    g = eval_safety_gradient(s, xhat)
    K = np.asarray(K, dtype=float)

    def objective(y):
        return float(np.dot(g, K @ y))

    eps = 1.0  # the objective is linear, so a large step just averages away roundoff
    coeff = np.empty(model.n_y)
    for i in range(model.n_y):
        e = np.zeros(model.n_y)
        e[i] = eps
        coeff[i] = (objective(h0 + e) - objective(h0 - e)) / (2.0 * eps)

    if norm is Norm.LINF:
        return h0 + delta * np.sign(coeff)

    cn = float(np.sqrt(np.dot(coeff, coeff)))
    if cn <= DEGENERATE_TOL:
        return h0.copy()
    step = 10.0 * delta / cn
    y = h0.copy()
    for _ in range(10_000):
        v = (y + step * coeff) - h0
        vn = float(np.sqrt(np.dot(v, v)))
        if vn > delta:
            v = v * (delta / vn)
        y_new = h0 + v
        if float(np.sqrt(np.dot(y_new - y, y_new - y))) <= 1e-12:
            return y_new
        y = y_new
    return y


def predicted_margin_rate(
    xhat, u, K, model: PlantModel, s: SafeSetSpec, delta: float, norm: Norm
) -> float:
    """Perceived margin rate under the matching gradient attack.

    The attack adds exactly ``delta`` times the dual norm of the gain-weighted
    gradient on top of the nominal rate ``grad . f(xhat, u)``.
    """
    g = eval_safety_gradient(s, xhat)
    nominal = float(np.dot(g, eval_dynamics(model, xhat, u)))
    c = _gain_weighted_gradient(xhat, K, model, s)
    return nominal + delta * dual_norm_value(c, norm)


def attack_step(
    cfg: AttackConfig,
    xhat,
    y_true,
    K,
    model: PlantModel,
    s: SafeSetSpec,
    rng: np.random.Generator | None = None,
) -> AttackOutcome:
    """One adversary decision: what the detector and observer will see.

    The attack arms only while the perceived margin is below ``gamma``.  A
    degenerate gradient direction falls back to passing the true measurement
    through (the least detectable no-op), reported as inactive.
    """
    y_true = np.asarray(y_true, dtype=float)
    h0 = eval_measurement(model, xhat)
    active = False
    y = y_true
    if cfg.mode is not AttackMode.NONE and eval_safety_margin(s, xhat) < cfg.gamma:
        if cfg.mode is AttackMode.GRADIENT:
            if cfg.norm is Norm.L2:
                try:
                    y = attack_l2(xhat, K, model, s, cfg.delta)
                    active = True
                except DegenerateDirectionError:
                    y = y_true
            else:
                y = attack_linf(xhat, K, model, s, cfg.delta)
                active = True
        elif cfg.mode is AttackMode.RANDOM:
            if rng is None:
                raise ValueError("attack_step needs rng for the Random mode")
            y = attack_random(xhat, model, cfg.delta, rng)
            active = True
    return AttackOutcome(
        y_injected=y, active=active, offset_norm=norm_value(y - h0, cfg.norm)
    )
