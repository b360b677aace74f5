import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from diffpos.dynamics import (
    SystemModel,
    check_forward_invariance,
    eval_jacobian,
    integrate_normalized,
    integrate_prolonged,
    integrate_trajectory,
    normalization_lambda,
    validate_model,
)
from diffpos.errors import (
    DegenerateVectorError,
    DivergenceError,
    EvaluationError,
    NormalizationError,
    PreconditionError,
)
from diffpos.model_zoo import pendulum
from diffpos.regions import CompactRegion


def linear(A):
    A = np.asarray(A, dtype=float)
    return SystemModel(len(A), lambda x: x @ A.T, lambda x: A)


matrices = st.lists(st.floats(-2, 2), min_size=4, max_size=4).map(lambda v: np.reshape(v, (2, 2)))


def test_linear_trajectory_matches_matrix_exponential():
    A = np.array([[-1.0, 2.0], [-3.0, -0.5]])
    x0 = np.array([1.0, -1.0])
    tr = integrate_trajectory(linear(A), x0, 3.0, h=1e-3)
    assert np.allclose(tr.final, expm(3.0 * A) @ x0, atol=1e-10)
    assert tr.times[-1] == pytest.approx(3.0)


def test_rk4_is_fourth_order():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    x0 = np.array([1.0, 0.0])
    exact = expm(2.0 * A) @ x0
    errs = [np.linalg.norm(integrate_trajectory(linear(A), x0, 2.0, h=h).final - exact)
            for h in (0.1, 0.05)]
    assert 12 < errs[0] / errs[1] < 20


def test_batched_initial_conditions():
    A = np.array([[-1.0, 0.5], [0.2, -2.0]])
    X0 = np.random.default_rng(0).normal(size=(7, 2))
    tr = integrate_trajectory(linear(A), X0, 1.0, h=1e-3)
    assert tr.states.shape == (1001, 7, 2)
    assert np.allclose(tr.final, X0 @ expm(A).T, atol=1e-10)


def test_wrapped_axis_stays_in_range():
    m = SystemModel(1, lambda x: np.ones_like(x), wrap=(True,))
    tr = integrate_trajectory(m, [3.0], 10.0, h=1e-2)
    assert np.all(tr.states >= -np.pi) and np.all(tr.states < np.pi)
    assert np.isclose(np.cos(tr.final[0]), np.cos(13.0), atol=1e-9)


@given(matrices, st.floats(0.1, 2.0))
def test_prolonged_tangent_matches_expm(A, T):
    dx0 = np.array([0.3, -0.7])
    tr = integrate_prolonged(linear(A), np.zeros(2), dx0, T, h=1e-3, stride=100)
    expect = expm(T * A) @ dx0
    got = tr.tangents()[-1]
    assert np.allclose(got, expect, rtol=1e-8, atol=1e-10)


@given(matrices)
def test_normalized_flow_keeps_unit_norm_and_direction(A):
    th0 = np.array([0.6, 0.8])
    tr = integrate_normalized(linear(A), np.zeros(2), th0, 1.5, h=1e-3, stride=50)
    assert np.allclose(np.linalg.norm(tr.directions, axis=-1), 1.0, atol=1e-6)
    expect = expm(1.5 * A) @ th0
    assert np.allclose(tr.directions[-1], expect / np.linalg.norm(expect), atol=1e-7)


def test_normalization_with_state_dependent_metric():
    def metric(x):
        G = np.zeros(x.shape + (2,))
        G[..., 0, 0] = 1.0 + x[..., 0] ** 2
        G[..., 1, 1] = 2.0
        return G

    m = SystemModel(2, lambda x: np.stack([x[..., 1], -x[..., 0]], -1),
                    lambda x: np.array([[0.0, 1.0], [-1.0, 0.0]]), metric=metric)
    x0 = np.array([0.5, 0.2])
    th0 = np.array([1.0, 1.0])
    th0 = th0 / np.sqrt(th0 @ metric(x0) @ th0)
    tr = integrate_normalized(m, x0, th0, 2.0, h=1e-3)
    norms = np.sqrt(np.einsum("ti,tij,tj->t", tr.directions, metric(tr.states), tr.directions))
    assert np.allclose(norms, 1.0, atol=1e-6)


def test_normalization_lambda_euclidean():
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    th = np.array([0.6, 0.8])
    assert normalization_lambda(linear(A), np.zeros(2), th) == pytest.approx(th @ A @ th)


def test_normalized_requires_unit_theta():
    with pytest.raises(PreconditionError):
        integrate_normalized(linear(np.eye(2)), np.zeros(2), np.array([1.0, 1.0]), 1.0)


def test_normalization_drift_limit():
    A = np.array([[-30.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NormalizationError):
        integrate_normalized(linear(A), np.zeros(2), np.array([0.6, 0.8]), 1.0, h=0.09)


def test_zero_tangent_rejected():
    with pytest.raises(DegenerateVectorError):
        integrate_prolonged(linear(np.eye(2)), np.zeros(2), np.zeros(2), 1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_time():
    m = SystemModel(1, lambda x: x ** 2)
    with pytest.raises(DivergenceError) as err:
        integrate_trajectory(m, [1.0], 2.0, h=1e-3)
    assert 0.9 < err.value.time <= 2.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_field_raises_evaluation_error():
    m = SystemModel(2, lambda x: np.stack([np.log(x[..., 0]), x[..., 1]], -1))
    with pytest.raises(EvaluationError) as err:
        m.field(np.array([-1.0, 0.0]))
    assert err.value.coordinate == (0,)


def test_finite_difference_jacobian_and_validation():
    b = pendulum(3.0, 0.5)
    pts = b.default_region.grid(5)
    assert validate_model(b.model, pts)["jacobian_rel_error"] < 1e-6
    fd_only = SystemModel(2, b.model.f, wrap=b.model.wrap)
    assert np.allclose(eval_jacobian(fd_only, pts), eval_jacobian(b.model, pts), atol=1e-7)
    wrong = SystemModel(2, b.model.f, lambda x: np.zeros(x.shape + (2,)), wrap=b.model.wrap)
    with pytest.raises(EvaluationError):
        validate_model(wrong, pts)


def test_forward_invariance_screen():
    b = pendulum(3.0, 0.0)
    assert check_forward_invariance(b.model, b.default_region).verdict == "PASS"
    box = CompactRegion((-1.0, -1.0), (1.0, 1.0), wrap=(True, False))
    rep = check_forward_invariance(b.model, box)
    assert rep.verdict == "FAIL"
    assert rep.witness["excess"] > 0


# -- documented examples ------------------------------------------------------

def test_pendulum_jacobian_at_origin():
    b = pendulum(3.0, 0.0)
    assert np.allclose(eval_jacobian(b.model, np.zeros(2)), [[0.0, 1.0], [-1.0, -3.0]])


def test_kuramoto_jacobian_at_sync():
    from diffpos.model_zoo import kuramoto
    J = eval_jacobian(kuramoto(3).model, np.zeros(3))
    C = np.ones((3, 3)) - 3 * np.eye(3)
    assert np.allclose(J, C / 3)


def test_exponential_decay_value():
    m = SystemModel(1, lambda x: -x, lambda x: -np.eye(1))
    assert integrate_trajectory(m, [1.0], 1.0, h=1e-3).final[0] == pytest.approx(0.367879, abs=1e-6)


def test_zero_field_and_sync_state_are_stationary():
    from diffpos.model_zoo import kuramoto
    zero = SystemModel(2, lambda x: np.zeros_like(x))
    assert np.array_equal(integrate_trajectory(zero, [0.3, -2.0], 1.0).final, [0.3, -2.0])
    tr = integrate_trajectory(kuramoto(4).model, np.full(4, 0.7), 2.0)
    assert np.allclose(tr.final, 0.7)


def test_tangent_of_diagonal_system_and_scaling():
    A = np.diag([-1.0, -2.0])
    a = integrate_prolonged(linear(A), np.zeros(2), [1.0, 1.0], 1.0)
    assert np.allclose(a.tangents()[-1], [np.exp(-1), np.exp(-2)], atol=1e-6)
    b = integrate_prolonged(linear(A), np.zeros(2), [5.0, 5.0], 1.0)
    assert np.allclose(a.directions, b.directions)
    assert np.allclose(b.log_mags - a.log_mags, np.log(5.0))


def test_lambda_examples():
    skew = linear([[0.0, 2.0], [-2.0, 0.0]])
    for th in ([1.0, 0.0], [0.6, -0.8]):
        assert normalization_lambda(skew, np.zeros(2), np.array(th)) == pytest.approx(0.0)
    diag = linear(np.diag([-1.0, -2.0]))
    assert normalization_lambda(diag, np.zeros(2), np.array([1.0, 0.0])) == pytest.approx(-1.0)
    assert normalization_lambda(diag, np.zeros(2), np.array([0.0, 1.0])) == pytest.approx(-2.0)


def test_normalized_flow_eigen_and_dominant_direction():
    diag = linear(np.diag([-1.0, -2.0]))
    tr = integrate_normalized(diag, np.zeros(2), np.array([1.0, 0.0]), 3.0)
    assert np.allclose(tr.directions, [1.0, 0.0])
    tr = integrate_normalized(diag, np.zeros(2), np.array([0.6, 0.8]), 20.0)
    assert np.allclose(np.abs(tr.directions[-1]), [1.0, 0.0], atol=1e-8)


def test_forward_invariance_of_scalar_flows_and_kuramoto_gap_region():
    from diffpos.model_zoo import kuramoto
    box = CompactRegion((-1.0,), (1.0,))
    assert check_forward_invariance(SystemModel(1, lambda x: -x), box).verdict == "PASS"
    rep = check_forward_invariance(SystemModel(1, lambda x: x), box)
    assert rep.verdict == "FAIL"
    assert abs(rep.witness["x0"][0]) == pytest.approx(1.0)
    b = kuramoto(3)
    assert check_forward_invariance(b.model, b.default_region).verdict == "PASS"
