"""Innovation-based attack detection.

Two layers: a plain magnitude check on the innovation against the stealth
radius, and a directional statistic that compares the innovation with the
worst-case attack direction.  Stealthy attacks beat the first; the second
catches them through their persistent alignment, averaged over a trailing
window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import PlantModel, SafeSetSpec, eval_measurement, eval_safety_gradient
from .norms import Norm, norm_value

# Slack on the magnitude threshold: offsets landing exactly on the stealth
# boundary must not alarm, including after roundoff.
MAG_TOL = 1e-12

# Below this the alignment statistic has no reference direction and is zero.
DEGENERATE_TOL = 1e-12

# Absolute slack on window-boundary time comparisons.
TIME_TOL = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    """Stealth radius, norm, alarm threshold nu, and averaging horizon."""

    delta: float
    norm: Norm = Norm.L2
    nu: float = 0.9
    horizon: float = 0.25

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


def magnitude_alarm(r, cfg: DetectorConfig) -> bool:
    """True when the innovation leaves the stealth ball."""
    return norm_value(r, cfg.norm) > cfg.delta + MAG_TOL


def correlation(
    y, xhat, K, model: PlantModel, s: SafeSetSpec, cfg: DetectorConfig
) -> float:
    """Alignment of the innovation with the worst-case attack direction.

    Ratio of ``grad . K (y - h(xhat))`` to its maximum over the stealth ball
    in the detector's norm.  Equals 1 when the innovation is exactly the
    L2-ball maximizer and the detector uses L2.  Zero when the reference
    direction degenerates.
    """
    g = eval_safety_gradient(s, xhat)
    c = np.asarray(K, dtype=float).T @ g
    den = norm_value(c, cfg.norm)
    if den <= DEGENERATE_TOL:
        return 0.0
    r = np.asarray(y, dtype=float) - eval_measurement(model, xhat)
    return float(np.dot(c, r)) / (cfg.delta * den)


@dataclass
class CorrelationWindow:
    """Trailing samples of the alignment statistic.

    Holds the window plus at most one older sample straddling the left edge,
    used to interpolate the integrand there.
    """

    times: list = field(default_factory=list)
    values: list = field(default_factory=list)


def ma_update(
    w: CorrelationWindow, t: float, rho: float, cfg: DetectorConfig
) -> tuple[float, bool, CorrelationWindow]:
    """Push a sample and evaluate the moving-average alarm.

    The average is the trapezoidal integral of the samples over the trailing
    ``min(horizon, t)`` seconds divided by that length (the first sample
    stands alone).  The alarm requires the average to exceed ``nu`` and a
    full horizon to have elapsed.

    Raises:
        ValueError: if ``t`` does not increase strictly.
    """
    if w.times and t <= w.times[-1]:
        raise ValueError(f"time must increase strictly, got {t} after {w.times[-1]}")
    w.times.append(t)
    w.values.append(rho)
    cutoff = t - cfg.horizon
    while len(w.times) >= 2 and w.times[1] <= cutoff + TIME_TOL:
        w.times.pop(0)
        w.values.pop(0)
    window = min(cfg.horizon, t)
    if len(w.times) == 1 or window <= 0.0:
        ma = rho
    else:
        ts = np.asarray(w.times)
        vs = np.asarray(w.values)
        lo = t - window
        if ts[0] < lo:
            # interpolate the integrand at the window edge
            frac = (lo - ts[0]) / (ts[1] - ts[0])
            v_lo = vs[0] + frac * (vs[1] - vs[0])
            ts = np.concatenate(([lo], ts[1:]))
            vs = np.concatenate(([v_lo], vs[1:]))
        total = float(np.sum(0.5 * (ts[1:] - ts[:-1]) * (vs[1:] + vs[:-1])))
        ma = total / window
    alarm = bool(ma > cfg.nu and t >= cfg.horizon - TIME_TOL)
    return ma, alarm, w
