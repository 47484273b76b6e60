"""Reference simulation loop, composed from the module operations.

Kept deliberately close to the step contract: per step, (1) measure the true
state, (2) let the adversary rewrite the measurement against the current
estimate, (3) run both detector layers, (4) filter the desired control at the
estimate, (5) advance plant and observer holding control and injected
measurement, (6) record the row.  The compiled kernel reimplements exactly
this for the double-integrator scenarios.
"""

from __future__ import annotations

import numpy as np

from .adversary import AttackMode, attack_step
from .detector import CorrelationWindow, correlation, ma_update, magnitude_alarm
from .errors import SimulationDivergedError
from .estimator import ObserverState, observer_step, residual
from .integrators import rk4_step
from .models import eval_safety_margin
from .safety import asif_filter, check_deactivation


def run_loop(prep, out: np.ndarray) -> int:
    """Fill ``out`` row by row; returns rows completed.

    Raises SimulationDivergedError (with the row count completed so far in
    ``trace``) if the plant or observer leaves the finite range.
    """
    model = prep.model
    s = prep.safe_set
    det = prep.detector
    att = prep.attack
    dt = prep.dt
    n_rows = prep.n_rows

    x = prep.x0.copy()
    obs = ObserverState(xhat=prep.xhat0.copy(), gain=prep.K)
    window = CorrelationWindow()
    arng = np.random.default_rng(att.seed) if att.mode is AttackMode.RANDOM else None

    for k in range(n_rows):
        t = k * dt
        y = np.asarray(model.measure(x), dtype=float)
        if prep.noise is not None:
            y = y + prep.noise[k]
        outcome = attack_step(att, obs.xhat, y, prep.K, model, s, rng=arng)
        y_inj = outcome.y_injected
        r = residual(y_inj, obs.xhat, model)
        mag = magnitude_alarm(r, det)
        rho = correlation(y_inj, obs.xhat, prep.K, model, s, det)
        ma, corr_alarm, window = ma_update(window, t, rho, det)
        u_des = prep.u_profile[k]
        u_act, cbf_active, infeasible = asif_filter(s, model, obs.xhat, u_des)
        deactivated, _ = check_deactivation(
            s, model, x, obs.xhat, grid_n=prep.deactivation_grid
        )

        row = out[k]
        row[0] = t
        pos = 1
        row[pos : pos + model.n_x] = x
        pos += model.n_x
        row[pos : pos + model.n_x] = obs.xhat
        pos += model.n_x
        row[pos : pos + model.n_y] = y
        pos += model.n_y
        row[pos : pos + model.n_y] = y_inj
        pos += model.n_y
        row[pos : pos + model.n_u] = u_des
        pos += model.n_u
        row[pos : pos + model.n_u] = u_act
        pos += model.n_u
        row[pos] = eval_safety_margin(s, x)
        row[pos + 1] = eval_safety_margin(s, obs.xhat)
        row[pos + 2] = rho
        row[pos + 3] = ma
        row[pos + 4] = 1.0 if mag else 0.0
        row[pos + 5] = 1.0 if corr_alarm else 0.0
        row[pos + 6] = 1.0 if outcome.active else 0.0
        row[pos + 7] = 1.0 if cbf_active else 0.0
        row[pos + 8] = 1.0 if infeasible else 0.0
        row[pos + 9] = 1.0 if deactivated else 0.0

        if k + 1 < n_rows:
            try:
                x_new = rk4_step(
                    lambda z: np.asarray(model.drift(z), dtype=float)
                    + np.asarray(model.input_matrix(z), dtype=float) @ u_act,
                    x,
                    dt,
                )
                obs = observer_step(obs, model, u_act, y_inj, dt)
            except SimulationDivergedError as exc:
                raise SimulationDivergedError(
                    f"simulation diverged after step {k} (t={t:g}): {exc}", trace=k + 1
                ) from exc
            x = x_new
    return n_rows
