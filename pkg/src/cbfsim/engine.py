"""Scenario runner: resolves a configuration, picks a backend, produces a trace."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _pyloop
from .adversary import AttackConfig, AttackMode
from .config import (
    SCENARIO_VARIANTS,
    KalmanConfig,
    NoiseKind,
    PROFILES,
    Scenario,
    ScenarioConfig,
)
from .detector import DetectorConfig
from .errors import SimulationDivergedError
from .estimator import LinearPlantMatrices, care_residual, stationary_kalman_gain
from .models import (
    MeasurementVariant,
    PlantModel,
    SafeSetSpec,
    double_integrator_linearization,
    make_double_integrator_scenario,
)
from .norms import Norm
from .trace import SimulationTrace, trace_columns

try:
    from . import _fastloop
except ImportError:  # pure-Python install
    _fastloop = None

BACKENDS = ("auto", "fast", "pure")
_BACKEND_ENV = "CBFSIM_BACKEND"


def fast_loop_available() -> bool:
    return _fastloop is not None


def n_steps(duration: float, dt: float) -> int:
    """floor(duration / dt), robust to the quotient sitting one ulp under an integer."""
    q = duration / dt
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, abs(r)):
        return int(r)
    return int(np.floor(q))


@dataclass
class _Prepared:
    model: PlantModel
    safe_set: SafeSetSpec
    variant: MeasurementVariant | None
    K: np.ndarray
    x0: np.ndarray
    xhat0: np.ndarray
    dt: float
    n_rows: int
    u_profile: np.ndarray
    attack: AttackConfig
    detector: DetectorConfig
    noise: np.ndarray | None
    deactivation_grid: int


@dataclass(frozen=True)
class GainResult:
    K: np.ndarray
    P: np.ndarray | None
    residual: float | None  # None when the gain was given explicitly
    computed: bool


def compute_gain(cfg: ScenarioConfig) -> GainResult:
    """Resolve the observer gain of a scenario, designing it if needed.

    An absent kalman block means the default design prior, Q = I and
    R = 1e-3 I sized to the scenario's dimensions.
    """
    kal: KalmanConfig | None = cfg.kalman
    if kal is not None and kal.K is not None:
        return GainResult(K=np.asarray(kal.K, dtype=float), P=None, residual=None, computed=False)
    if cfg.scenario is Scenario.CUSTOM:
        A, C = cfg.lin
    else:
        A, C = double_integrator_linearization(SCENARIO_VARIANTS[cfg.scenario])
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if kal is None:
        kal = KalmanConfig(Q=np.eye(A.shape[0]), R=1e-3 * np.eye(C.shape[0]))
    m = LinearPlantMatrices(A=A, C=C, Q=kal.Q, R=kal.R)
    K, P = stationary_kalman_gain(m)
    return GainResult(K=K, P=P, residual=care_residual(m, P), computed=True)


def _resolve_profile(u_des):
    if callable(u_des):
        return u_des
    if isinstance(u_des, str):
        return PROFILES[u_des]
    const = float(u_des)
    return lambda t: const


def prepare(cfg: ScenarioConfig) -> _Prepared:
    if cfg.scenario is Scenario.CUSTOM:
        model, safe_set, variant = cfg.model, cfg.safe_set, None
    else:
        variant = SCENARIO_VARIANTS[cfg.scenario]
        model, safe_set = make_double_integrator_scenario(variant)
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.shape != (model.n_x,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n_x},)")
    xhat0 = x0.copy() if cfg.xhat0 is None else np.asarray(cfg.xhat0, dtype=float)
    if xhat0.shape != (model.n_x,):
        raise ValueError(f"xhat0 has shape {xhat0.shape}, expected ({model.n_x},)")
    K = compute_gain(cfg).K
    if K.shape != (model.n_x, model.n_y):
        raise ValueError(f"gain has shape {K.shape}, expected {(model.n_x, model.n_y)}")
    rows = n_steps(cfg.duration, cfg.dt) + 1
    profile = _resolve_profile(cfg.u_des)
    u_profile = np.empty((rows, model.n_u))
    for k in range(rows):
        u_profile[k, :] = float(profile(k * cfg.dt))
    if cfg.noise.kind is NoiseKind.GAUSSIAN and cfg.noise.stddev > 0.0:
        nrng = np.random.default_rng(cfg.noise.seed)
        noise = cfg.noise.stddev * nrng.standard_normal((rows, model.n_y))
    else:
        noise = None
    return _Prepared(
        model=model,
        safe_set=safe_set,
        variant=variant,
        K=K,
        x0=x0,
        xhat0=xhat0,
        dt=cfg.dt,
        n_rows=rows,
        u_profile=u_profile,
        attack=cfg.attack,
        detector=cfg.detector,
        noise=noise,
        deactivation_grid=cfg.deactivation_grid,
    )


def _select_backend(requested: str | None, prep: _Prepared) -> str:
    choice = requested if requested is not None else os.environ.get(_BACKEND_ENV, "auto")
    if choice not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {choice!r}")
    eligible = prep.variant is not None and fast_loop_available()
    if choice == "auto":
        return "fast" if eligible else "pure"
    if choice == "fast":
        if not fast_loop_available():
            raise RuntimeError(
                "the compiled kernel is not available in this install; "
                "rebuild with Cython or use backend='pure'"
            )
        if prep.variant is None:
            raise RuntimeError("Custom scenarios run on the pure backend only")
        return "fast"
    return "pure"


def _run_fast(prep: _Prepared, out: np.ndarray) -> int:
    att = prep.attack
    det = prep.detector
    arng = np.random.default_rng(att.seed) if att.mode is AttackMode.RANDOM else None
    has_noise = prep.noise is not None
    noise = prep.noise if has_noise else np.zeros((1, prep.model.n_y))
    return _fastloop.run_double_integrator(
        np.ascontiguousarray(prep.x0),
        np.ascontiguousarray(prep.xhat0),
        np.ascontiguousarray(prep.K),
        1 if prep.variant is MeasurementVariant.POSITION_ONLY else 0,
        prep.dt,
        prep.n_rows,
        np.ascontiguousarray(prep.u_profile),
        float(prep.safe_set.control_lower[0]),
        float(prep.safe_set.control_upper[0]),
        {AttackMode.NONE: 0, AttackMode.RANDOM: 1, AttackMode.GRADIENT: 2}[att.mode],
        0 if att.norm is Norm.L2 else 1,
        att.delta,
        att.gamma,
        arng,
        0 if det.norm is Norm.L2 else 1,
        det.delta,
        det.nu,
        det.horizon,
        1 if has_noise else 0,
        np.ascontiguousarray(noise),
        out,
    )


def run_scenario(cfg: ScenarioConfig, backend: str | None = None) -> SimulationTrace:
    """Simulate a scenario and return its trace.

    ``backend`` overrides the CBFSIM_BACKEND environment variable; one of
    "auto" (compiled kernel when eligible), "fast", or "pure".  Identical
    configurations produce identical traces on a given backend.
    """
    prep = prepare(cfg)
    chosen = _select_backend(backend, prep)
    cols = trace_columns(prep.model.n_x, prep.model.n_y, prep.model.n_u)
    out = np.zeros((prep.n_rows, len(cols)))

    def wrap(rows):
        return SimulationTrace(
            columns=cols,
            data=out[:rows],
            n_x=prep.model.n_x,
            n_y=prep.model.n_y,
            n_u=prep.model.n_u,
            dt=prep.dt,
        )

    if chosen == "fast":
        done = _run_fast(prep, out)
        if done < prep.n_rows:
            raise SimulationDivergedError(
                f"simulation diverged after step {done - 1} (t={(done - 1) * prep.dt:g})",
                trace=wrap(done),
            )
    else:
        try:
            _pyloop.run_loop(prep, out)
        except SimulationDivergedError as exc:
            rows = exc.trace if isinstance(exc.trace, int) else 0
            raise SimulationDivergedError(str(exc), trace=wrap(rows)) from exc
    return wrap(prep.n_rows)
