"""Minimally invasive safety filtering on a control-barrier constraint.

At a state x the filter admits only controls satisfying ``a + b.u >= 0``
where ``a = grad(x).f0(x) + alpha(margin(x))`` and ``b = grad(x).G(x)``,
intersected with the control box.  The filtered control is the closest
admissible point to the desired one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .models import (
    PlantModel,
    SafeSetSpec,
    _check_vec,
    eval_safety_gradient,
    eval_safety_margin,
)

# Tolerance for declaring the barrier constraint active at the filtered control.
ACTIVE_TOL = 1e-10


@dataclass(frozen=True)
class CbfConstraint:
    """Half-space ``{u : a + b.u >= 0}`` in control space."""

    a: float
    b: np.ndarray


@dataclass(frozen=True)
class SafeControlInterval:
    """Admissible controls for a one-dimensional input; empty means none."""

    lo: float
    hi: float
    empty: bool


def cbf_constraint(s: SafeSetSpec, model: PlantModel, x) -> CbfConstraint:
    x = _check_vec("x", x, model.n_x)
    g = eval_safety_gradient(s, x)
    f0 = np.asarray(model.drift(x), dtype=float)
    G = np.asarray(model.input_matrix(x), dtype=float)
    a = float(np.dot(g, f0) + s.alpha(eval_safety_margin(s, x)))
    b = np.asarray(g @ G, dtype=float)
    return CbfConstraint(a=a, b=b)


def safe_control_membership(s: SafeSetSpec, model: PlantModel, x, u) -> bool:
    """Whether ``u`` lies in the control box and satisfies the barrier constraint at x."""
    u = _check_vec("u", u, model.n_u)
    if np.any(u < s.control_lower) or np.any(u > s.control_upper):
        return False
    c = cbf_constraint(s, model, x)
    return bool(c.a + float(np.dot(c.b, u)) >= 0.0)


def _repaired_cut(a: float, b: float) -> float:
    """Constraint boundary ``-a / b``, nudged so the constraint holds at it.

    The rounded quotient can land one ulp on the violating side of
    ``a + b u >= 0``; membership is exact, so step the cut toward the
    feasible side until the inequality actually evaluates true.
    """
    cut = -a / b
    toward = math.inf if b > 0.0 else -math.inf
    for _ in range(8):
        if a + b * cut >= 0.0:
            break
        cut = math.nextafter(cut, toward)
    return cut


def safe_control_interval(s: SafeSetSpec, model: PlantModel, x) -> SafeControlInterval:
    """Exact admissible interval for ``n_u == 1``."""
    if model.n_u != 1:
        raise ValueError(f"safe_control_interval requires n_u == 1, got n_u={model.n_u}")
    c = cbf_constraint(s, model, x)
    lo_box = float(s.control_lower[0])
    hi_box = float(s.control_upper[0])
    b = float(c.b[0])
    if b > 0.0:
        lo, hi = max(lo_box, _repaired_cut(c.a, b)), hi_box
    elif b < 0.0:
        lo, hi = lo_box, min(hi_box, _repaired_cut(c.a, b))
    else:
        if c.a >= 0.0:
            lo, hi = lo_box, hi_box
        else:
            return SafeControlInterval(lo=math.nan, hi=math.nan, empty=True)
    if lo > hi:
        return SafeControlInterval(lo=math.nan, hi=math.nan, empty=True)
    return SafeControlInterval(lo=lo, hi=hi, empty=False)


def _box_halfspace_projection(u_des, lo, hi, a, b):
    """Project u_des onto ``{lo <= u <= hi, a + b.u >= 0}``, assumed nonempty.

    The projection is ``u(mu) = clip(u_des + mu b)`` for the smallest mu >= 0
    with ``b.u(mu) = -a``; ``b.u(mu)`` is piecewise linear and nondecreasing
    in mu, so mu is found exactly by walking its breakpoints (coordinates
    entering or leaving saturation).  This is the KKT point: free coordinates
    carry the single multiplier mu, clipped ones their box multiplier.
    """
    u0 = np.minimum(np.maximum(u_des, lo), hi)
    if a + float(np.dot(b, u0)) >= 0.0:
        return u0
    target = -a
    bps = [0.0]
    for i in range(b.shape[0]):
        if b[i] == 0.0:
            continue
        for edge in ((lo[i] - u_des[i]) / b[i], (hi[i] - u_des[i]) / b[i]):
            if edge > 0.0 and math.isfinite(edge):
                bps.append(edge)
    bps = sorted(set(bps))

    def phi(mu):
        return float(np.dot(b, np.minimum(np.maximum(u_des + mu * b, lo), hi)))

    for mu_a, mu_b in zip(bps, bps[1:]):
        phi_a, phi_b = phi(mu_a), phi(mu_b)
        if phi_b >= target:
            if phi_b == phi_a:
                mu = mu_b
            else:
                mu = mu_a + (target - phi_a) * (mu_b - mu_a) / (phi_b - phi_a)
            u = np.minimum(np.maximum(u_des + mu * b, lo), hi)
            if a + float(np.dot(b, u)) < 0.0:
                # Interpolation rounding can land an ulp short of the
                # boundary.  phi is nondecreasing and phi(mu_b) >= target, so
                # bisect to the smallest representable multiplier that
                # satisfies the constraint.
                mu_lo, mu_hi = mu, mu_b
                for _ in range(80):
                    mid = 0.5 * (mu_lo + mu_hi)
                    if mid <= mu_lo or mid >= mu_hi:
                        break
                    if phi(mid) >= target:
                        mu_hi = mid
                    else:
                        mu_lo = mid
                u = np.minimum(np.maximum(u_des + mu_hi * b, lo), hi)
            return u
    # Feasibility puts the target at or below phi at full saturation; land there.
    return np.minimum(np.maximum(u_des + bps[-1] * b, lo), hi)


def asif_filter(
    s: SafeSetSpec, model: PlantModel, x, u_des
) -> tuple[np.ndarray, bool, bool]:
    """Filter a desired control through the barrier constraint at x.

    Returns:
        (u_act, constraint_active, infeasible).  ``constraint_active`` is True
        when the barrier constraint holds with equality at ``u_act`` (within
        ACTIVE_TOL).  When no admissible control exists, ``infeasible`` is True
        and ``u_act`` is the least-violating control, ``argmax a + b.u`` over
        the box.
    """
    u_des = _check_vec("u_des", u_des, model.n_u)
    c = cbf_constraint(s, model, x)
    lo = s.control_lower
    hi = s.control_upper
    slack_at_best = c.a + float(
        np.dot(c.b, np.where(c.b > 0.0, hi, np.where(c.b < 0.0, lo, 0.0)))
    )
    if slack_at_best < 0.0:
        u_act = np.where(
            c.b > 0.0, hi, np.where(c.b < 0.0, lo, np.minimum(np.maximum(u_des, lo), hi))
        )
        active = abs(c.a + float(np.dot(c.b, u_act))) <= ACTIVE_TOL
        return u_act, active, True
    if model.n_u == 1:
        iv = safe_control_interval(s, model, x)
        if iv.empty:
            # Only reachable at an exactly degenerate corner where the slack
            # check above rounded to zero but the repaired cut left the box;
            # the certified box edge is the answer.
            u_act = np.where(
                c.b > 0.0,
                hi,
                np.where(c.b < 0.0, lo, np.minimum(np.maximum(u_des, lo), hi)),
            )
        else:
            u_act = np.array([min(max(float(u_des[0]), iv.lo), iv.hi)])
    else:
        u_act = _box_halfspace_projection(u_des, lo, hi, c.a, c.b)
    active = abs(c.a + float(np.dot(c.b, u_act))) <= ACTIVE_TOL
    return u_act, active, False


def check_deactivation(
    s: SafeSetSpec, model: PlantModel, x_true, xhat, grid_n: int = 5
) -> tuple[bool, np.ndarray | None]:
    """Whether the admissible set at the estimate leaks outside the true one.

    A control admissible at ``xhat`` but not at ``x_true`` means the filter,
    driven by the estimate, can approve a control that is actually unsafe.
    Returns that witness control when one exists.

    For ``n_u == 1`` the check is exact interval set-difference and the
    witness is the midpoint of a nonempty difference component.  For larger
    input dimensions a grid with ``grid_n`` points per axis is scanned.
    """
    if model.n_u == 1:
        ihat = safe_control_interval(s, model, xhat)
        if ihat.empty:
            return False, None
        itrue = safe_control_interval(s, model, x_true)
        if itrue.empty:
            return True, np.array([0.5 * (ihat.lo + ihat.hi)])
        if ihat.lo < itrue.lo:
            w = 0.5 * (ihat.lo + min(ihat.hi, itrue.lo))
            return True, np.array([w])
        if ihat.hi > itrue.hi:
            w = 0.5 * (max(ihat.lo, itrue.hi) + ihat.hi)
            return True, np.array([w])
        return False, None
    if grid_n < 2:
        raise ValueError(f"grid_n must be at least 2, got {grid_n}")
    axes = [
        np.linspace(float(s.control_lower[i]), float(s.control_upper[i]), grid_n)
        for i in range(model.n_u)
    ]
    chat = cbf_constraint(s, model, xhat)
    ctrue = cbf_constraint(s, model, x_true)
    for combo in itertools.product(*axes):
        u = np.array(combo)
        if chat.a + float(np.dot(chat.b, u)) >= 0.0 and (
            ctrue.a + float(np.dot(ctrue.b, u)) < 0.0
        ):
            return True, u
    return False, None
