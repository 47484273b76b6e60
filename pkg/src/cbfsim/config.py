"""Scenario configuration: programmatic, JSON files, and named presets.

The five presets reproduce the double-integrator study: start at
(-1.75, 0), push right with u_des = 1 for 3 s at dt = 1e-3, observer gain
from Q = I, R = 1e-3 I, stealth radius 1e-3, moving-average detector with
horizon 0.25 and threshold 0.9.  They differ only in measurement variant and
attack policy.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .adversary import AttackConfig, AttackMode
from .detector import DetectorConfig
from .estimator import LinearPlantMatrices, stationary_kalman_gain
from .models import (
    MeasurementVariant,
    PlantModel,
    SafeSetSpec,
    double_integrator_linearization,
)
from .norms import Norm


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key path."""


class Scenario(enum.Enum):
    DOUBLE_INTEGRATOR_FULL = "DoubleIntegratorFull"
    DOUBLE_INTEGRATOR_POS_ONLY = "DoubleIntegratorPosOnly"
    CUSTOM = "Custom"


SCENARIO_VARIANTS = {
    Scenario.DOUBLE_INTEGRATOR_FULL: MeasurementVariant.FULL_STATE,
    Scenario.DOUBLE_INTEGRATOR_POS_ONLY: MeasurementVariant.POSITION_ONLY,
}


class NoiseKind(enum.Enum):
    NONE = "None"
    GAUSSIAN = "Gaussian"


@dataclass(frozen=True)
class NoiseConfig:
    kind: NoiseKind = NoiseKind.NONE
    stddev: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind is NoiseKind.GAUSSIAN and self.stddev < 0.0:
            raise ConfigError(f"noise.stddev must be nonnegative, got {self.stddev}")


@dataclass(frozen=True)
class KalmanConfig:
    """Either design inputs (Q, R) or an explicit gain K."""

    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    K: np.ndarray | None = None

    def __post_init__(self):
        has_qr = self.Q is not None and self.R is not None
        if self.K is None and not has_qr:
            raise ConfigError("kalman requires either K or both Q and R")
        if self.K is not None and (self.Q is not None or self.R is not None):
            raise ConfigError("kalman accepts either K or (Q, R), not both")
        for name in ("Q", "R", "K"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.atleast_2d(np.asarray(v, dtype=float)))


# Named desired-control profiles usable from JSON configs.
PROFILES: dict[str, Callable[[float], float]] = {
    "zero": lambda t: 0.0,
    "unit": lambda t: 1.0,
}


def register_profile(name: str, fn: Callable[[float], float]) -> None:
    PROFILES[name] = fn


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    dt: float
    duration: float
    x0: np.ndarray
    xhat0: np.ndarray | None = None  # None means same as x0
    u_des: float | str | Callable[[float], float] = 0.0
    attack: AttackConfig = field(default_factory=AttackConfig)
    detector: DetectorConfig = field(default_factory=lambda: DetectorConfig(delta=1e-3))
    # None defers to the default design prior (Q = I, R = 1e-3 I sized to the
    # scenario) at gain-design time.
    kalman: KalmanConfig | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    # Custom scenarios carry their own model, safe set, and linearization.
    model: PlantModel | None = None
    safe_set: SafeSetSpec | None = None
    lin: tuple[np.ndarray, np.ndarray] | None = None
    deactivation_grid: int = 5

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ConfigError(
                f"duration must cover at least one step, got {self.duration} with dt {self.dt}"
            )
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.xhat0 is not None:
            object.__setattr__(
                self, "xhat0", np.atleast_1d(np.asarray(self.xhat0, dtype=float))
            )
        if self.scenario is Scenario.CUSTOM:
            if self.model is None or self.safe_set is None:
                raise ConfigError("Custom scenarios need model and safe_set")
            if (self.kalman is None or self.kalman.K is None) and self.lin is None:
                raise ConfigError(
                    "Custom scenarios need lin=(A, C) to design a gain from (Q, R)"
                )
        if isinstance(self.u_des, str) and self.u_des not in PROFILES:
            raise ConfigError(
                f"u_des names unknown profile {self.u_des!r}; known: {sorted(PROFILES)}"
            )


_PRESET_GAIN_CACHE: dict[MeasurementVariant, np.ndarray] = {}


def _preset_gain(variant: MeasurementVariant) -> np.ndarray:
    """Observer gain used by the named presets.

    The study fixes one stationary Kalman design, computed for the full state
    measurement with Q = I and R = 1e-3 I.  The position-only preset runs the
    same design restricted to the channel it actually measures (K C'), rather
    than re-solving the Riccati equation for the scalar output.  Re-solving
    would hand the single-channel adversary a strictly stronger lever than the
    two-channel one and invert the measurement-richness ordering the presets
    exist to demonstrate.  Configs built by hand are free to choose either.
    """
    if variant not in _PRESET_GAIN_CACHE:
        a_mat, c_full = double_integrator_linearization(MeasurementVariant.FULL_STATE)
        design = LinearPlantMatrices(
            A=a_mat, C=c_full, Q=np.eye(2), R=1e-3 * np.eye(2)
        )
        gain, _ = stationary_kalman_gain(design)
        _, c_variant = double_integrator_linearization(variant)
        _PRESET_GAIN_CACHE[variant] = gain @ c_variant.T
    return _PRESET_GAIN_CACHE[variant].copy()


def _di_preset(scenario: Scenario, attack: AttackConfig) -> ScenarioConfig:
    return ScenarioConfig(
        scenario=scenario,
        dt=1e-3,
        duration=3.0,
        x0=np.array([-1.75, 0.0]),
        xhat0=None,
        u_des=1.0,
        attack=attack,
        detector=DetectorConfig(delta=1e-3, norm=Norm.L2, nu=0.9, horizon=0.25),
        kalman=KalmanConfig(K=_preset_gain(SCENARIO_VARIANTS[scenario])),
        noise=NoiseConfig(),
    )


def _gradient_attack() -> AttackConfig:
    return AttackConfig(mode=AttackMode.GRADIENT, norm=Norm.L2, delta=1e-3)


def _random_attack() -> AttackConfig:
    return AttackConfig(mode=AttackMode.RANDOM, norm=Norm.L2, delta=1e-3, seed=7)


BUILTIN_NAMES = ("fig2", "fig3-posonly", "fig3-random", "fig4-random", "fig4-gradient")


def builtin_config(name: str) -> ScenarioConfig:
    """One of the named presets; see BUILTIN_NAMES."""
    if name == "fig2":
        return _di_preset(Scenario.DOUBLE_INTEGRATOR_FULL, _gradient_attack())
    if name == "fig3-posonly":
        return _di_preset(Scenario.DOUBLE_INTEGRATOR_POS_ONLY, _gradient_attack())
    if name == "fig3-random":
        return _di_preset(Scenario.DOUBLE_INTEGRATOR_FULL, _random_attack())
    if name == "fig4-random":
        return _di_preset(Scenario.DOUBLE_INTEGRATOR_FULL, _random_attack())
    if name == "fig4-gradient":
        return _di_preset(Scenario.DOUBLE_INTEGRATOR_FULL, _gradient_attack())
    raise ConfigError(f"unknown builtin scenario {name!r}; known: {list(BUILTIN_NAMES)}")


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown configuration key: {where}")


def _get(obj: dict, key: str, path: str, required: bool = False, default=None):
    if key not in obj:
        if required:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"missing required configuration key: {where}")
        return default
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _enum(value, enum_cls, where: str):
    for member in enum_cls:
        if member.value == value:
            return member
    raise ConfigError(
        f"{where}: expected one of {[m.value for m in enum_cls]}, got {value!r}"
    )


def _vector(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a nonempty list of numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{where}: expected a list of rows")
    return np.array([[_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)]
                     for i, r in enumerate(value)])


def _parse_attack(obj, path: str) -> AttackConfig:
    _reject_unknown(obj, {"mode", "norm", "delta", "gamma", "seed"}, path)
    gamma = _get(obj, "gamma", path, default=math.inf)
    if gamma is None or gamma == "inf":
        gamma = math.inf
    else:
        gamma = _number(gamma, f"{path}.gamma")
    try:
        return AttackConfig(
            mode=_enum(_get(obj, "mode", path, default="None"), AttackMode, f"{path}.mode"),
            norm=_enum(_get(obj, "norm", path, default="L2"), Norm, f"{path}.norm"),
            delta=_number(_get(obj, "delta", path, default=1e-3), f"{path}.delta"),
            gamma=gamma,
            seed=int(_number(_get(obj, "seed", path, default=0), f"{path}.seed")),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_detector(obj, path: str) -> DetectorConfig:
    _reject_unknown(obj, {"delta", "norm", "nu", "horizon"}, path)
    try:
        return DetectorConfig(
            delta=_number(_get(obj, "delta", path, default=1e-3), f"{path}.delta"),
            norm=_enum(_get(obj, "norm", path, default="L2"), Norm, f"{path}.norm"),
            nu=_number(_get(obj, "nu", path, default=0.9), f"{path}.nu"),
            horizon=_number(_get(obj, "horizon", path, default=0.25), f"{path}.horizon"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_kalman(obj, path: str, n_y: int) -> KalmanConfig:
    _reject_unknown(obj, {"Q", "R", "K"}, path)
    Q = obj.get("Q")
    R = obj.get("R")
    K = obj.get("K")
    kal = KalmanConfig(
        Q=None if Q is None else _matrix(Q, f"{path}.Q"),
        R=None if R is None else _matrix(R, f"{path}.R"),
        K=None if K is None else _matrix(K, f"{path}.K"),
    )
    if kal.K is not None and kal.K.shape != (2, n_y):
        raise ConfigError(
            f"{path}.K: expected shape (2, {n_y}) for this scenario, got {kal.K.shape}"
        )
    if kal.R is not None and kal.R.shape != (n_y, n_y):
        raise ConfigError(
            f"{path}.R: expected shape ({n_y}, {n_y}) for this scenario, got {kal.R.shape}"
        )
    if kal.Q is not None and kal.Q.shape != (2, 2):
        raise ConfigError(
            f"{path}.Q: expected shape (2, 2) for this scenario, got {kal.Q.shape}"
        )
    return kal


def _parse_noise(obj, path: str) -> NoiseConfig:
    _reject_unknown(obj, {"kind", "stddev", "seed"}, path)
    return NoiseConfig(
        kind=_enum(_get(obj, "kind", path, default="None"), NoiseKind, f"{path}.kind"),
        stddev=_number(_get(obj, "stddev", path, default=0.0), f"{path}.stddev"),
        seed=int(_number(_get(obj, "seed", path, default=0), f"{path}.seed")),
    )


_TOP_KEYS = {
    "scenario", "dt", "duration", "x0", "xhat0", "u_des",
    "attack", "detector", "kalman", "noise",
}


def parse_config(obj: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON object; unknown keys are rejected."""
    if not isinstance(obj, dict):
        raise ConfigError(f"configuration root must be an object, got {type(obj).__name__}")
    _reject_unknown(obj, _TOP_KEYS, "")
    scenario = _enum(_get(obj, "scenario", "", required=True), Scenario, "scenario")
    if scenario is Scenario.CUSTOM:
        raise ConfigError(
            "scenario: Custom scenarios carry code (model, safe_set) and can only be "
            "constructed programmatically"
        )
    n_y = 2 if scenario is Scenario.DOUBLE_INTEGRATOR_FULL else 1
    x0 = _vector(_get(obj, "x0", "", required=True), "x0")
    if x0.shape != (2,):
        raise ConfigError(f"x0: expected 2 entries for this scenario, got {x0.shape[0]}")
    xhat0 = _get(obj, "xhat0", "", default="same-as-x0")
    if xhat0 == "same-as-x0" or xhat0 is None:
        xhat0 = None
    else:
        xhat0 = _vector(xhat0, "xhat0")
        if xhat0.shape != (2,):
            raise ConfigError(
                f"xhat0: expected 2 entries for this scenario, got {xhat0.shape[0]}"
            )
    u_des = _get(obj, "u_des", "", default=0.0)
    if isinstance(u_des, str):
        if u_des not in PROFILES:
            raise ConfigError(f"u_des: unknown profile {u_des!r}; known: {sorted(PROFILES)}")
    else:
        u_des = _number(u_des, "u_des")
    attack_obj = _get(obj, "attack", "", default={})
    detector_obj = _get(obj, "detector", "", default={})
    kalman_obj = _get(obj, "kalman", "", default=None)
    noise_obj = _get(obj, "noise", "", default={})
    try:
        return ScenarioConfig(
            scenario=scenario,
            dt=_number(_get(obj, "dt", "", required=True), "dt"),
            duration=_number(_get(obj, "duration", "", required=True), "duration"),
            x0=x0,
            xhat0=xhat0,
            u_des=u_des,
            attack=_parse_attack(attack_obj, "attack"),
            detector=_parse_detector(detector_obj, "detector"),
            kalman=(
                None if kalman_obj is None else _parse_kalman(kalman_obj, "kalman", n_y)
            ),
            noise=_parse_noise(noise_obj, "noise"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(source) -> ScenarioConfig:
    """Load a scenario from a builtin name or a JSON file path."""
    if isinstance(source, str) and source in BUILTIN_NAMES:
        return builtin_config(source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(
            f"{source!r} is neither a builtin scenario {list(BUILTIN_NAMES)} nor an existing file"
        )
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(obj)


def with_overrides(cfg: ScenarioConfig, dt=None, duration=None) -> ScenarioConfig:
    """Copy with dt and/or duration replaced (CLI overrides)."""
    kwargs = {}
    if dt is not None:
        kwargs["dt"] = dt
    if duration is not None:
        kwargs["duration"] = duration
    return replace(cfg, **kwargs) if kwargs else cfg
