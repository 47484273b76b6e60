import numpy as np
import pytest

from cbfsim import (
    AttackConfig,
    AttackMode,
    DegenerateDirectionError,
    MeasurementVariant,
    Norm,
    attack_l2,
    attack_linf,
    attack_numeric,
    attack_random,
    attack_step,
    dual_norm_value,
    eval_dynamics,
    eval_measurement,
    eval_safety_gradient,
    make_double_integrator_scenario,
    norm_value,
    predicted_margin_rate,
)


@pytest.fixture(scope="module")
def di():
    return make_double_integrator_scenario(MeasurementVariant.FULL_STATE)


@pytest.fixture(scope="module")
def di_pos():
    return make_double_integrator_scenario(MeasurementVariant.POSITION_ONLY)


def _objective(s, K, xhat, y):
    g = eval_safety_gradient(s, xhat)
    return float(np.dot(g, np.asarray(K, dtype=float) @ y))


# ------------------------------------------------------------------- norms

def test_norm_values():
    v = np.array([3.0, -4.0])
    assert norm_value(v, Norm.L2) == 5.0
    assert norm_value(v, Norm.LINF) == 4.0
    assert dual_norm_value(v, Norm.L2) == 5.0
    assert dual_norm_value(v, Norm.LINF) == 7.0  # dual of Linf is L1


# ------------------------------------------------------------- closed forms

def test_l2_axis_aligned(di):
    model, s = di
    y = attack_l2(np.array([-1.75, 0.0]), np.eye(2), model, s, 1e-3)
    assert y[0] == pytest.approx(-1.751, abs=1e-12)
    assert y[1] == 0.0


def test_l2_diagonal(di):
    model, s = di
    y = attack_l2(np.array([-0.5, 1.0]), np.eye(2), model, s, 1e-3)
    off = 1e-3 / np.sqrt(2.0)
    assert y[0] == pytest.approx(-0.5 - off, abs=1e-15)
    assert y[1] == pytest.approx(1.0 - off, abs=1e-15)


def test_l2_zero_radius(di):
    model, s = di
    xhat = np.array([-0.5, 1.0])
    assert np.array_equal(attack_l2(xhat, np.eye(2), model, s, 0.0), xhat)


def test_l2_degenerate_raises(di):
    model, s = di
    with pytest.raises(DegenerateDirectionError):
        attack_l2(np.array([-0.5, 1.0]), np.zeros((2, 2)), model, s, 1e-3)


def test_linf_values(di):
    model, s = di
    y = attack_linf(np.array([-0.5, 1.0]), np.eye(2), model, s, 1e-3)
    assert y[0] == pytest.approx(-0.501, abs=1e-12)
    assert y[1] == pytest.approx(0.999, abs=1e-12)
    # a vanishing coordinate coefficient leaves that coordinate untouched
    y = attack_linf(np.array([-1.75, 0.0]), np.eye(2), model, s, 1e-3)
    assert y[0] == pytest.approx(-1.751, abs=1e-12)
    assert y[1] == 0.0


def test_linf_zero_direction_is_noop(di):
    model, s = di
    xhat = np.array([-0.5, 1.0])
    assert np.array_equal(attack_linf(xhat, np.zeros((2, 2)), model, s, 1e-3), xhat)


# ------------------------------------------------------------------ oracle

@pytest.mark.parametrize("variant_fixture", ["di", "di_pos"])
def test_numeric_oracle_matches_closed_forms(variant_fixture, request):
    model, s = request.getfixturevalue(variant_fixture)
    rng = np.random.default_rng(41)
    for _ in range(50):
        xhat = rng.uniform(-2.0, 2.0, size=2)
        K = rng.normal(scale=10.0, size=(2, model.n_y))
        delta = float(10.0 ** rng.uniform(-4.0, -1.0))
        c = np.asarray(K).T @ eval_safety_gradient(s, xhat)
        if float(np.sqrt(np.dot(c, c))) <= 1e-6:
            continue
        y_closed = attack_l2(xhat, K, model, s, delta)
        y_num = attack_numeric(xhat, K, model, s, delta, Norm.L2)
        assert abs(
            _objective(s, K, xhat, y_closed) - _objective(s, K, xhat, y_num)
        ) <= 1e-6
        y_closed = attack_linf(xhat, K, model, s, delta)
        y_num = attack_numeric(xhat, K, model, s, delta, Norm.LINF)
        assert np.array_equal(y_closed, y_num)


def test_numeric_zero_radius(di):
    model, s = di
    xhat = np.array([-0.5, 1.0])
    assert np.array_equal(attack_numeric(xhat, np.eye(2), model, s, 0.0, Norm.L2), xhat)


def test_ascent_optimality(di):
    """No stealth-feasible measurement beats the closed-form maximizers."""
    model, s = di
    rng = np.random.default_rng(97)
    for _ in range(100):
        xhat = rng.uniform(-2.0, 2.0, size=2)
        K = rng.normal(scale=5.0, size=(2, 2))
        delta = 1e-2
        h0 = eval_measurement(model, xhat)
        c = K.T @ eval_safety_gradient(s, xhat)
        if float(np.sqrt(np.dot(c, c))) <= 1e-9:
            continue
        y_l2 = attack_l2(xhat, K, model, s, delta)
        y_linf = attack_linf(xhat, K, model, s, delta)
        for _ in range(100):
            d = rng.standard_normal(2)
            d *= rng.uniform(0.0, delta) / float(np.sqrt(np.dot(d, d)))
            assert _objective(s, K, xhat, y_l2) >= _objective(s, K, xhat, h0 + d) - 1e-9
            d_inf = rng.uniform(-delta, delta, size=2)
            assert (
                _objective(s, K, xhat, y_linf)
                >= _objective(s, K, xhat, h0 + d_inf) - 1e-9
            )


# ------------------------------------------------------------------ random

def test_random_offset_norm_and_determinism(di):
    model, s = di
    xhat = np.array([-0.5, 1.0])
    h0 = eval_measurement(model, xhat)
    delta = 1e-3
    rng_a = np.random.default_rng(7)
    rng_b = np.random.default_rng(7)
    a = [attack_random(xhat, model, delta, rng_a) for _ in range(5)]
    b = [attack_random(xhat, model, delta, rng_b) for _ in range(5)]
    for ya, yb in zip(a, b):
        assert np.array_equal(ya, yb)
        assert abs(float(np.linalg.norm(ya - h0)) - delta) <= 1e-12
    # different draws move in different directions
    assert not np.array_equal(a[0], a[1])


def test_random_scalar_output_is_sign_flip(di_pos):
    model, s = di_pos
    xhat = np.array([-0.5, 1.0])
    h0 = eval_measurement(model, xhat)
    rng = np.random.default_rng(3)
    offs = [float(attack_random(xhat, model, 1e-3, rng)[0] - h0[0]) for _ in range(200)]
    assert all(abs(abs(o) - 1e-3) <= 1e-12 for o in offs)
    assert any(o > 0 for o in offs) and any(o < 0 for o in offs)


# ------------------------------------------------------- margin-rate identity

def test_predicted_rate_examples(di):
    model, s = di
    xhat = np.array([-1.75, 0.0])
    u = np.array([1.0])
    assert predicted_margin_rate(xhat, u, np.eye(2), model, s, 1e-3, Norm.L2) == (
        pytest.approx(0.002, abs=1e-15)
    )
    assert predicted_margin_rate(xhat, u, np.eye(2), model, s, 1e-3, Norm.LINF) == (
        pytest.approx(0.002, abs=1e-15)
    )
    nominal = float(
        np.dot(eval_safety_gradient(s, xhat), eval_dynamics(model, xhat, u))
    )
    assert predicted_margin_rate(xhat, u, np.eye(2), model, s, 0.0, Norm.L2) == nominal


@pytest.mark.parametrize("norm", [Norm.L2, Norm.LINF])
def test_margin_rate_identity(di, norm):
    """The injected measurement adds exactly delta times the dual norm to the
    perceived margin rate."""
    model, s = di
    rng = np.random.default_rng(29)
    for _ in range(100):
        xhat = rng.uniform(-2.0, 2.0, size=2)
        K = rng.normal(scale=5.0, size=(2, 2))
        u = np.array([rng.uniform(-1.0, 1.0)])
        delta = float(10.0 ** rng.uniform(-4.0, -1.0))
        g = eval_safety_gradient(s, xhat)
        h0 = eval_measurement(model, xhat)
        if norm is Norm.L2:
            try:
                y = attack_l2(xhat, K, model, s, delta)
            except DegenerateDirectionError:
                continue
        else:
            y = attack_linf(xhat, K, model, s, delta)
        measured = float(
            np.dot(g, eval_dynamics(model, xhat, u) + K @ (y - h0))
        )
        predicted = predicted_margin_rate(xhat, u, K, model, s, delta, norm)
        assert abs(measured - predicted) <= 1e-9


# ------------------------------------------------------------- attack_step

def test_step_none_passes_through(di):
    model, s = di
    y_true = np.array([0.3, -0.2])
    out = attack_step(AttackConfig(), np.array([-0.5, 1.0]), y_true, np.eye(2), model, s)
    assert np.array_equal(out.y_injected, y_true)
    assert not out.active


def test_step_gamma_gates_the_attack(di):
    model, s = di
    xhat = np.array([-1.75, 0.0])  # margin 3.5
    y_true = model.measure(xhat)
    cfg = AttackConfig(mode=AttackMode.GRADIENT, gamma=1.0)
    out = attack_step(cfg, xhat, y_true, np.eye(2), model, s)
    assert not out.active
    assert np.array_equal(out.y_injected, y_true)

    cfg = AttackConfig(mode=AttackMode.GRADIENT, gamma=4.0)
    out = attack_step(cfg, xhat, y_true, np.eye(2), model, s)
    assert out.active


def test_step_always_armed_by_default(di):
    model, s = di
    cfg = AttackConfig(mode=AttackMode.GRADIENT, delta=1e-3)
    for x1 in (-1.75, -0.5, -0.1):
        xhat = np.array([x1, 0.5])
        out = attack_step(cfg, xhat, model.measure(xhat), np.eye(2), model, s)
        assert out.active
        assert out.offset_norm <= cfg.delta + 1e-12


def test_step_degenerate_gradient_falls_back(di):
    model, s = di
    xhat = np.array([-0.5, 1.0])
    y_true = np.array([9.0, 9.0])
    cfg = AttackConfig(mode=AttackMode.GRADIENT, norm=Norm.L2)
    out = attack_step(cfg, xhat, y_true, np.zeros((2, 2)), model, s)
    assert not out.active
    assert np.array_equal(out.y_injected, y_true)


def test_step_random_needs_rng(di):
    model, s = di
    cfg = AttackConfig(mode=AttackMode.RANDOM)
    with pytest.raises(ValueError, match="rng"):
        attack_step(cfg, np.zeros(2), np.zeros(2), np.eye(2), model, s)


def test_step_stealth_all_modes(di):
    model, s = di
    rng = np.random.default_rng(53)
    for mode, norm in [
        (AttackMode.GRADIENT, Norm.L2),
        (AttackMode.GRADIENT, Norm.LINF),
        (AttackMode.RANDOM, Norm.L2),
    ]:
        cfg = AttackConfig(mode=mode, norm=norm, delta=5e-3)
        for _ in range(50):
            xhat = rng.uniform(-2.0, 2.0, size=2)
            out = attack_step(
                cfg, xhat, model.measure(xhat), np.eye(2), model, s, rng=rng
            )
            assert out.offset_norm <= cfg.delta + 1e-12


def test_config_rejects_bad_delta():
    with pytest.raises(ValueError, match="delta"):
        AttackConfig(delta=0.0)
    with pytest.raises(ValueError, match="delta"):
        AttackConfig(delta=-1.0)
