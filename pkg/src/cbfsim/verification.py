"""Acceptance checks: reproduction properties, oracle equivalences, invariants.

Each check returns a CheckResult; run_all executes the whole battery.  The
CLI's verify subcommand and the acceptance test suite both drive this module,
so a property lives in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .adversary import (
    AttackConfig,
    AttackMode,
    attack_l2,
    attack_linf,
    attack_numeric,
    predicted_margin_rate,
)
from .config import BUILTIN_NAMES, ScenarioConfig, builtin_config
from .engine import fast_loop_available, run_scenario
from .estimator import LinearPlantMatrices, stationary_kalman_gain, care_residual
from .integrators import rk4_step
from .models import (
    MeasurementVariant,
    check_gradient_fd,
    double_integrator_linearization,
    eval_dynamics,
    eval_measurement,
    eval_safety_gradient,
    make_double_integrator_scenario,
)
from .norms import Norm, dual_norm_value
from .safety import asif_filter, safe_control_interval, safe_control_membership
from .trace import FLAG_COLUMNS, SimulationTrace


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


class TraceCache:
    """Runs each named scenario at most once per backend."""

    def __init__(self, backend: str | None = None):
        self.backend = backend
        self._traces: dict[str, SimulationTrace] = {}

    def get(self, name: str) -> SimulationTrace:
        if name not in self._traces:
            self._traces[name] = run_scenario(builtin_config(name), backend=self.backend)
        return self._traces[name]


def _exit_time(trace: SimulationTrace) -> float | None:
    """First time the true safety margin goes negative, None if it never does."""
    below = np.where(trace.column("hS_x") < 0.0)[0]
    return float(trace.t[below[0]]) if below.size else None


def _first_alarm(trace: SimulationTrace, column: str) -> float | None:
    fired = np.where(trace.column(column) != 0.0)[0]
    return float(trace.t[fired[0]]) if fired.size else None


def check_perceived_vs_actual(cache: TraceCache) -> CheckResult:
    """Full-measurement gradient attack: estimate stays safe, truth does not."""
    tr = cache.get("fig2")
    min_hat = float(tr.column("hS_xhat").min())
    x1 = tr.column("x1")
    crossed = np.where(x1 > 0.0)[0]
    t_cross = float(tr.t[crossed[0]]) if crossed.size else None
    ok = min_hat >= -1e-9 and t_cross is not None and t_cross < 3.0
    return CheckResult(
        "perceived-safe-actual-unsafe",
        ok,
        f"min hS(xhat)={min_hat:.3e}, x1>0 at t={t_cross}",
    )


def check_random_attack_safe(cache: TraceCache) -> CheckResult:
    """Random stealthy offsets never deactivate the filter."""
    tr = cache.get("fig3-random")
    min_hs = float(tr.column("hS_x").min())
    ok = min_hs >= -1e-6
    return CheckResult(
        "random-attack-stays-safe", ok, f"min hS(x)={min_hs:.3e} over 3 s"
    )


def check_measurement_richness_ordering(cache: TraceCache) -> CheckResult:
    """Two measured channels give the adversary a faster exit than one."""
    t_full = _exit_time(cache.get("fig2"))
    t_pos = _exit_time(cache.get("fig3-posonly"))
    ok = (
        t_full is not None
        and t_pos is not None
        and t_full < t_pos
        and t_pos < 3.0
    )
    return CheckResult(
        "measurement-richness-ordering",
        ok,
        f"exit full={t_full} s < exit position-only={t_pos} s",
    )


def check_correlation_saturates(cache: TraceCache) -> CheckResult:
    """The alignment statistic is exactly 1 while the matched attack runs."""
    tr = cache.get("fig4-gradient")
    attacked = tr.column("attack_active") != 0.0
    rho = tr.column("rho")[attacked]
    worst = float(np.abs(rho - 1.0).max()) if rho.size else math.inf
    ok = rho.size > 0 and worst <= 1e-9
    return CheckResult(
        "correlation-saturates-at-one",
        ok,
        f"max |rho-1|={worst:.3e} over {rho.size} attacked steps",
    )


def check_detection_time(cache: TraceCache) -> CheckResult:
    """Moving-average alarm fires shortly after the horizon fills, and only then."""
    t_grad = _first_alarm(cache.get("fig4-gradient"), "alarm_corr")
    t_rand = _first_alarm(cache.get("fig4-random"), "alarm_corr")
    ok = t_grad is not None and 0.15 <= t_grad <= 0.30 and t_rand is None
    return CheckResult(
        "detection-time-window",
        ok,
        f"gradient alarm at t={t_grad}, random alarm at t={t_rand}",
    )


def check_stealth(cache: TraceCache) -> CheckResult:
    """No magnitude alarm in any reproduction scenario."""
    worst = []
    for name in BUILTIN_NAMES:
        tr = cache.get(name)
        if np.any(tr.column("alarm_mag") != 0.0):
            worst.append(name)
    return CheckResult(
        "stealth-no-magnitude-alarm",
        not worst,
        "magnitude alarm stayed quiet in all scenarios"
        if not worst
        else f"magnitude alarm fired in: {worst}",
    )


def check_attack_oracle_equivalence(n_instances: int = 200) -> CheckResult:
    """Closed-form maximizers match an independent numerical maximizer."""
    rng = np.random.default_rng(2024)
    worst_obj = 0.0
    worst_coord = 0.0
    count = 0
    while count < n_instances:
        variant = (
            MeasurementVariant.FULL_STATE
            if count % 2 == 0
            else MeasurementVariant.POSITION_ONLY
        )
        model, s = make_double_integrator_scenario(variant)
        xhat = rng.uniform(-3.0, 3.0, size=2)
        K = rng.normal(0.0, 10.0, size=(2, model.n_y))
        delta = float(10.0 ** rng.uniform(-4.0, -1.0))
        g = eval_safety_gradient(s, xhat)
        c = K.T @ g
        if float(np.sqrt(c @ c)) <= 1e-9:
            continue
        count += 1
        h0 = eval_measurement(model, xhat)

        def obj(y):
            return float(g @ (K @ (y - h0)))

        y_l2 = attack_l2(xhat, K, model, s, delta)
        y_num = attack_numeric(xhat, K, model, s, delta, Norm.L2)
        worst_obj = max(worst_obj, abs(obj(y_l2) - obj(y_num)))

        y_linf = attack_linf(xhat, K, model, s, delta)
        y_numi = attack_numeric(xhat, K, model, s, delta, Norm.LINF)
        worst_obj = max(worst_obj, abs(obj(y_linf) - obj(y_numi)))
        big = np.abs(c) > 1e-9
        if np.any(big):
            worst_coord = max(
                worst_coord, float(np.abs(y_linf[big] - y_numi[big]).max())
            )
    ok = worst_obj <= 1e-6 and worst_coord == 0.0
    return CheckResult(
        "attack-oracle-equivalence",
        ok,
        f"max objective gap {worst_obj:.3e}, max Linf coordinate gap {worst_coord:.3e} "
        f"over {n_instances} instances",
    )


def check_margin_rate_identity(n_states: int = 100) -> CheckResult:
    """Measured perceived-margin rate equals nominal plus delta times the dual norm."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(n_states):
        variant = (
            MeasurementVariant.FULL_STATE
            if i % 2 == 0
            else MeasurementVariant.POSITION_ONLY
        )
        model, s = make_double_integrator_scenario(variant)
        xhat = rng.uniform(-2.0, 2.0, size=2)
        u = rng.uniform(-1.0, 1.0, size=1)
        K = rng.normal(0.0, 10.0, size=(2, model.n_y))
        delta = 1e-3
        g = eval_safety_gradient(s, xhat)
        h0 = eval_measurement(model, xhat)
        for norm, attack in ((Norm.L2, attack_l2), (Norm.LINF, attack_linf)):
            try:
                y = attack(xhat, K, model, s, delta)
            except ValueError:
                continue
            measured = float(g @ (eval_dynamics(model, xhat, u) + K @ (y - h0)))
            predicted = predicted_margin_rate(xhat, u, K, model, s, delta, norm)
            worst = max(worst, abs(measured - predicted))
    ok = worst <= 1e-9
    return CheckResult(
        "margin-rate-identity",
        ok,
        f"max |measured - predicted| = {worst:.3e} over {n_states} states, both norms",
    )


def check_filter_correctness(cache: TraceCache) -> CheckResult:
    """No-attack invariance, minimal invasiveness, and the pinned interval point."""
    cfg = builtin_config("fig2")
    cfg = replace(cfg, attack=AttackConfig(mode=AttackMode.NONE))
    tr = run_scenario(cfg, backend=cache.backend)
    min_hs = float(tr.column("hS_x").min())
    part_a = min_hs >= -1e-6

    model, s = make_double_integrator_scenario(MeasurementVariant.FULL_STATE)
    rng = np.random.default_rng(11)
    part_b = True
    for _ in range(200):
        x = rng.uniform(-2.0, 2.0, size=2)
        u_des = rng.uniform(-1.0, 1.0, size=1)
        u_act, _, infeasible = asif_filter(s, model, x, u_des)
        if infeasible:
            continue
        if safe_control_membership(s, model, x, u_des) and not np.array_equal(
            u_act, u_des
        ):
            part_b = False
            break

    iv = safe_control_interval(s, model, np.array([-0.5, 1.0]))
    part_c = (not iv.empty) and iv.lo == -1.0 and iv.hi == -1.0

    ok = part_a and part_b and part_c
    return CheckResult(
        "filter-correctness",
        ok,
        f"no-attack min hS(x)={min_hs:.3e}; pass-through exact={part_b}; "
        f"interval at (-0.5,1) = [{iv.lo}, {iv.hi}]",
    )


def check_gain_design() -> CheckResult:
    """Riccati solve hits the algebraic equation for both variants; scalar closed form."""
    worst = 0.0
    for variant in MeasurementVariant:
        A, C = double_integrator_linearization(variant)
        m = LinearPlantMatrices(A=A, C=C, Q=np.eye(2), R=1e-3 * np.eye(C.shape[0]))
        _, P = stationary_kalman_gain(m)
        worst = max(worst, care_residual(m, P))
    scalar = LinearPlantMatrices(A=[[0.0]], C=[[1.0]], Q=[[1.0]], R=[[1e-3]])
    K, _ = stationary_kalman_gain(scalar)
    scalar_err = abs(float(K[0, 0]) - math.sqrt(1000.0))
    ok = worst <= 1e-8 and scalar_err <= 1e-6
    return CheckResult(
        "stationary-gain-design",
        ok,
        f"max CARE residual {worst:.3e}; scalar gain error {scalar_err:.3e}",
    )


def check_gradients_and_integrator(n_states: int = 100) -> CheckResult:
    """Finite-difference gradient agreement and RK4 exactness on the polynomial flow."""
    model, s = make_double_integrator_scenario(MeasurementVariant.FULL_STATE)
    rng = np.random.default_rng(13)
    worst_g = 0.0
    for _ in range(n_states):
        x = rng.uniform(-3.0, 3.0, size=2)
        worst_g = max(worst_g, check_gradient_fd(s, x))

    worst_rk = 0.0
    for _ in range(100):
        x = rng.uniform(-3.0, 3.0, size=2)
        dt = float(10.0 ** rng.uniform(-4.0, -1.0))
        stepped = rk4_step(lambda z: np.array([z[1], 1.0]), x, dt)
        exact = np.array([x[0] + x[1] * dt + 0.5 * dt * dt, x[1] + dt])
        worst_rk = max(worst_rk, float(np.abs(stepped - exact).max()))
    ok = worst_g <= 1e-6 and worst_rk <= 1e-12
    return CheckResult(
        "gradient-and-integrator",
        ok,
        f"max gradient FD error {worst_g:.3e}; max RK4 flow error {worst_rk:.3e}",
    )


def check_determinism(cache: TraceCache) -> CheckResult:
    """Identical configuration, identical bytes, including the seeded random policy."""
    ok = True
    for name in ("fig2", "fig3-random"):
        a = run_scenario(builtin_config(name), backend=cache.backend)
        b = run_scenario(builtin_config(name), backend=cache.backend)
        if not np.array_equal(a.data, b.data):
            ok = False
    return CheckResult(
        "determinism",
        ok,
        "repeated runs byte-identical" if ok else "repeated runs differ",
    )


def check_step_size_robustness(cache: TraceCache) -> CheckResult:
    """Halving dt moves the boundary-crossing time by well under a percent."""
    t_cross = []
    for dt in (1e-3, 5e-4):
        cfg = replace(builtin_config("fig2"), dt=dt)
        tr = run_scenario(cfg, backend=cache.backend)
        crossed = np.where(tr.column("x1") > 0.0)[0]
        t_cross.append(float(tr.t[crossed[0]]) if crossed.size else math.inf)
    shift = abs(t_cross[1] - t_cross[0]) / t_cross[0]
    ok = math.isfinite(shift) and shift < 0.01
    return CheckResult(
        "step-size-robustness",
        ok,
        f"x1-crossing at dt=1e-3: {t_cross[0]} s, dt=5e-4: {t_cross[1]} s "
        f"(shift {100.0 * shift:.4f}%)",
    )


def check_backend_agreement() -> CheckResult:
    """Compiled kernel and reference loop agree to 1e-10, flags exactly."""
    if not fast_loop_available():
        return CheckResult(
            "backend-agreement",
            True,
            "compiled kernel not installed; nothing to compare",
        )
    worst = 0.0
    for name in BUILTIN_NAMES:
        cfg = builtin_config(name)
        tp = run_scenario(cfg, backend="pure")
        tf = run_scenario(cfg, backend="fast")
        flag_idx = [tp.columns.index(c) for c in FLAG_COLUMNS]
        float_idx = [i for i in range(len(tp.columns)) if i not in flag_idx]
        worst = max(
            worst, float(np.abs(tp.data[:, float_idx] - tf.data[:, float_idx]).max())
        )
        if not np.array_equal(tp.data[:, flag_idx], tf.data[:, flag_idx]):
            return CheckResult(
                "backend-agreement", False, f"flag columns differ in {name}"
            )
    ok = worst <= 1e-10
    return CheckResult(
        "backend-agreement", ok, f"max float-column difference {worst:.3e}"
    )


def run_all(backend: str | None = None) -> list[CheckResult]:
    """Execute every check; scenario runs are shared through one cache."""
    cache = TraceCache(backend)
    return [
        check_perceived_vs_actual(cache),
        check_random_attack_safe(cache),
        check_measurement_richness_ordering(cache),
        check_correlation_saturates(cache),
        check_detection_time(cache),
        check_stealth(cache),
        check_attack_oracle_equivalence(),
        check_margin_rate_identity(),
        check_filter_correctness(cache),
        check_gain_design(),
        check_gradients_and_integrator(),
        check_determinism(cache),
        check_step_size_robustness(cache),
        check_backend_agreement(),
    ]
