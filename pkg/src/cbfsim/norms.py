"""Vector norms used by the stealth bound and the detector threshold."""

from __future__ import annotations

import enum

import numpy as np


class Norm(enum.Enum):
    L2 = "L2"
    LINF = "Linf"


def norm_value(v, norm: Norm) -> float:
    """``||v||`` in the selected norm."""
    v = np.asarray(v, dtype=float)
    if norm is Norm.L2:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.max(np.abs(v))) if v.size else 0.0


def dual_norm_value(v, norm: Norm) -> float:
    """Dual norm of ``norm``: L2 pairs with itself, Linf with the L1 sum."""
    v = np.asarray(v, dtype=float)
    if norm is Norm.L2:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.sum(np.abs(v)))
