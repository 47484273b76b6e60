"""Safety-filtered control under stealthy sensor falsification.

Simulates an observer-driven control loop whose safety filter projects the
desired control onto a control-barrier constraint, an adversary that rewrites
measurements inside the detector's stealth ball, and innovation-based
detection of that adversary.  Ships the double-integrator study as named
presets, a compiled fast loop with a pure-Python fallback, and a CSV trace
format.
"""

from .adversary import (
    AttackConfig,
    AttackMode,
    AttackOutcome,
    DegenerateDirectionError,
    attack_l2,
    attack_linf,
    attack_numeric,
    attack_random,
    attack_step,
    predicted_margin_rate,
)
from .config import (
    BUILTIN_NAMES,
    ConfigError,
    KalmanConfig,
    NoiseConfig,
    NoiseKind,
    Scenario,
    ScenarioConfig,
    builtin_config,
    load_config,
    parse_config,
    register_profile,
    with_overrides,
)
from .detector import (
    CorrelationWindow,
    DetectorConfig,
    correlation,
    ma_update,
    magnitude_alarm,
)
from .engine import (
    GainResult,
    compute_gain,
    fast_loop_available,
    n_steps,
    run_scenario,
)
from .errors import SimulationDivergedError
from .estimator import (
    LinearPlantMatrices,
    ObserverState,
    RiccatiConvergenceError,
    care_residual,
    observer_step,
    residual,
    stationary_kalman_gain,
)
from .integrators import rk4_step
from .models import (
    MeasurementVariant,
    PlantModel,
    SafeSetSpec,
    check_gradient_fd,
    double_integrator_linearization,
    eval_dynamics,
    eval_measurement,
    eval_safety_gradient,
    eval_safety_margin,
    make_double_integrator_scenario,
    validate_alpha,
)
from .norms import Norm, dual_norm_value, norm_value
from .safety import (
    CbfConstraint,
    SafeControlInterval,
    asif_filter,
    cbf_constraint,
    check_deactivation,
    safe_control_interval,
    safe_control_membership,
)
from .trace import SimulationTrace, trace_columns, write_trace
from .verification import CheckResult, run_all as run_acceptance_checks

__version__ = "0.1.0"
