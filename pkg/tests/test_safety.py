import numpy as np
import pytest

from cbfsim import (
    MeasurementVariant,
    PlantModel,
    SafeSetSpec,
    asif_filter,
    cbf_constraint,
    check_deactivation,
    make_double_integrator_scenario,
    safe_control_interval,
    safe_control_membership,
)


@pytest.fixture(scope="module")
def di():
    return make_double_integrator_scenario(MeasurementVariant.FULL_STATE)


def _two_input_scenario():
    """Planar plant with two actuators, used to exercise the QP paths."""
    model = PlantModel(
        n_x=2,
        n_u=2,
        n_y=2,
        drift=lambda x: np.array([x[1], 0.0]),
        input_matrix=lambda x: np.array([[0.3, -0.2], [1.0, 0.5]]),
        measure=lambda x: np.asarray(x, dtype=float),
    )
    s = SafeSetSpec(
        margin=lambda x: -2.0 * x[0] - x[1] * x[1],
        gradient=lambda x: np.array([-2.0, -2.0 * x[1]]),
        alpha=lambda v: 2.0 * v,
        admissible_state=lambda x: x[0] <= 0.0,
        control_lower=np.array([-1.0, -1.0]),
        control_upper=np.array([1.0, 1.0]),
    )
    return model, s


# ----------------------------------------------------------- cbf_constraint

@pytest.mark.parametrize(
    "x, a, b",
    [
        ((-1.75, 0.0), 7.0, 0.0),
        ((-0.5, 1.0), -2.0, -2.0),
        ((0.0, 0.0), 0.0, 0.0),
        ((0.5, 1.0), -6.0, -2.0),
    ],
)
def test_constraint_values(di, x, a, b):
    model, s = di
    c = cbf_constraint(s, model, np.array(x))
    assert c.a == a
    assert c.b.shape == (1,)
    assert c.b[0] == b


# ------------------------------------------------------------- membership

def test_membership(di):
    model, s = di
    assert safe_control_membership(s, model, np.array([-1.75, 0.0]), np.array([1.0]))
    assert not safe_control_membership(s, model, np.array([-0.5, 1.0]), np.array([0.0]))
    # boundary of the constraint counts as safe
    assert safe_control_membership(s, model, np.array([-0.5, 1.0]), np.array([-1.0]))
    # outside the box, whatever the constraint says
    assert not safe_control_membership(s, model, np.array([-1.75, 0.0]), np.array([1.5]))


# --------------------------------------------------------------- intervals

def test_interval_full_box(di):
    model, s = di
    iv = safe_control_interval(s, model, np.array([-1.75, 0.0]))
    assert not iv.empty
    assert (iv.lo, iv.hi) == (-1.0, 1.0)


def test_interval_single_point(di):
    model, s = di
    iv = safe_control_interval(s, model, np.array([-0.5, 1.0]))
    assert not iv.empty
    assert (iv.lo, iv.hi) == (-1.0, -1.0)


def test_interval_empty(di):
    model, s = di
    assert safe_control_interval(s, model, np.array([0.5, 1.0])).empty


def test_interval_zero_coefficient_negative_slack(di):
    model, s = di
    # x2 = 0 makes b vanish; positive x1 makes a negative, so nothing is safe.
    assert safe_control_interval(s, model, np.array([1.0, 0.0])).empty


def test_interval_positive_coefficient(di):
    model, s = di
    # x2 < 0 flips the coefficient sign and the cut becomes a lower bound.
    iv = safe_control_interval(s, model, np.array([0.3, -1.0]))
    # a = 2 - 1.2 - 2 = -1.2, b = 2 -> u >= 0.6
    assert not iv.empty
    assert iv.lo == pytest.approx(0.6, abs=1e-12)
    assert iv.hi == 1.0


def test_interval_requires_single_input(di):
    model, s = _two_input_scenario()
    with pytest.raises(ValueError, match="n_u"):
        safe_control_interval(s, model, np.zeros(2))


# ------------------------------------------------------------- asif_filter

def test_filter_pass_through_is_exact(di):
    model, s = di
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = rng.uniform(-3.0, 0.0, size=2) * np.array([1.0, 0.0]) + np.array(
            [0.0, 1.0]
        ) * rng.uniform(-0.5, 0.5)
        iv = safe_control_interval(s, model, x)
        if iv.empty:
            continue
        u_des = np.array([rng.uniform(iv.lo, iv.hi)])
        u_act, active, infeasible = asif_filter(s, model, x, u_des)
        assert np.array_equal(u_act, u_des)
        assert not infeasible


def test_filter_examples(di):
    model, s = di
    u_act, active, infeasible = asif_filter(s, model, np.array([-1.75, 0.0]), np.array([1.0]))
    assert u_act[0] == 1.0 and not active and not infeasible

    u_act, active, infeasible = asif_filter(s, model, np.array([-0.5, 1.0]), np.array([1.0]))
    assert u_act[0] == -1.0 and active and not infeasible

    u_act, active, infeasible = asif_filter(s, model, np.array([0.5, 1.0]), np.array([0.0]))
    assert u_act[0] == -1.0 and infeasible


def test_filter_feasible_output_is_admissible(di):
    model, s = di
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = rng.uniform(-2.0, 2.0, size=2)
        u_des = np.array([rng.uniform(-2.0, 2.0)])
        u_act, _, infeasible = asif_filter(s, model, x, u_des)
        if not infeasible:
            assert safe_control_membership(s, model, x, u_act)


def test_filter_infeasible_zero_coefficient_clips(di):
    model, s = di
    # b = 0 and a < 0: every control violates equally, keep the clipped wish.
    u_act, active, infeasible = asif_filter(s, model, np.array([1.0, 0.0]), np.array([0.4]))
    assert infeasible and u_act[0] == 0.4 and not active


def test_two_input_projection_matches_qp_oracle():
    cp = pytest.importorskip("cvxpy")
    model, s = _two_input_scenario()
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(60):
        x = rng.uniform(-2.0, 2.0, size=2)
        u_des = rng.uniform(-2.0, 2.0, size=2)
        c = cbf_constraint(s, model, x)
        best = c.a + float(
            np.dot(c.b, np.where(c.b > 0.0, s.control_upper, s.control_lower))
        )
        if best < 1e-9:
            continue  # infeasible or touching; covered elsewhere
        u_act, _, infeasible = asif_filter(s, model, x, u_des)
        assert not infeasible
        u = cp.Variable(2)
        prob = cp.Problem(
            cp.Minimize(cp.sum_squares(u - u_des)),
            [c.a + c.b @ u >= 0, u >= s.control_lower, u <= s.control_upper],
        )
        prob.solve(solver=cp.CLARABEL)
        assert prob.status == "optimal"
        assert np.max(np.abs(u_act - u.value)) <= 1e-6
        checked += 1
    assert checked >= 20


def test_two_input_feasible_outputs_admissible():
    model, s = _two_input_scenario()
    rng = np.random.default_rng(23)
    for _ in range(200):
        x = rng.uniform(-2.0, 2.0, size=2)
        u_des = rng.uniform(-2.0, 2.0, size=2)
        u_act, _, infeasible = asif_filter(s, model, x, u_des)
        assert np.all(u_act >= s.control_lower - 1e-12)
        assert np.all(u_act <= s.control_upper + 1e-12)
        if not infeasible:
            c = cbf_constraint(s, model, x)
            assert c.a + float(np.dot(c.b, u_act)) >= 0.0


# ------------------------------------------------------- check_deactivation

def test_deactivation_examples(di):
    model, s = di
    deact, w = check_deactivation(s, model, np.array([-0.5, 1.0]), np.array([-1.75, 0.0]))
    assert deact and w[0] == 0.0
    # the witness really is approved at the estimate and rejected at the truth
    assert safe_control_membership(s, model, np.array([-1.75, 0.0]), w)
    assert not safe_control_membership(s, model, np.array([-0.5, 1.0]), w)

    deact, w = check_deactivation(s, model, np.array([-0.5, 1.0]), np.array([-0.5, 1.0]))
    assert not deact and w is None

    deact, w = check_deactivation(s, model, np.array([-1.75, 0.0]), np.array([-0.5, 1.0]))
    assert not deact and w is None


def test_deactivation_empty_estimate_set(di):
    model, s = di
    deact, w = check_deactivation(s, model, np.array([-1.75, 0.0]), np.array([0.5, 1.0]))
    assert not deact and w is None


def test_deactivation_empty_true_set(di):
    model, s = di
    deact, w = check_deactivation(s, model, np.array([0.5, 1.0]), np.array([-1.75, 0.0]))
    assert deact
    assert safe_control_membership(s, model, np.array([-1.75, 0.0]), w)
    assert not safe_control_membership(s, model, np.array([0.5, 1.0]), w)


def test_deactivation_left_leak(di):
    model, s = di
    # Estimate at x2 < 0 admits low controls the true state (x2 > 0) forbids...
    # pick states whose intervals are [0.6, 1] (true) and [-1, 1] (estimate).
    x_true = np.array([0.3, -1.0])
    xhat = np.array([-1.75, 0.0])
    deact, w = check_deactivation(s, model, x_true, xhat)
    assert deact
    assert safe_control_membership(s, model, xhat, w)
    assert not safe_control_membership(s, model, x_true, w)


def test_deactivation_grid_path():
    model, s = _two_input_scenario()
    x_true = np.array([-0.5, 1.0])
    xhat = np.array([-1.75, 0.0])
    deact, w = check_deactivation(s, model, x_true, xhat, grid_n=7)
    assert deact
    chat = cbf_constraint(s, model, xhat)
    ctrue = cbf_constraint(s, model, x_true)
    assert chat.a + float(np.dot(chat.b, w)) >= 0.0
    assert ctrue.a + float(np.dot(ctrue.b, w)) < 0.0

    deact, w = check_deactivation(s, model, xhat, xhat, grid_n=5)
    assert not deact and w is None


def test_deactivation_grid_n_validated():
    model, s = _two_input_scenario()
    with pytest.raises(ValueError, match="grid_n"):
        check_deactivation(s, model, np.zeros(2), np.zeros(2), grid_n=1)
