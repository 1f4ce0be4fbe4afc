import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from symqnn.ansatz import build_fully_symmetric
from symqnn.circuit import ArityError, ParamCircuit
from symqnn.encoding import FeatureScaler, PointCloudSample
from symqnn.statevector import Gate
from symqnn.training import (
    Model,
    TrainConfig,
    TrainResult,
    circuit_shift_gradient,
    decision_scores,
    fit_model,
    initial_state_for,
    make_model,
    mse_loss,
    offset_loss,
    offset_loss_grad_b,
    parameter_shift_gradient,
    predict,
    predict_batch,
    train,
)
from symqnn.encoding import encode_batch

from oracle import circuit_unitary, pauli


def one_qubit_model(gates, n_params):
    """Flattened 1-d, 1-point model; the scaler sends x = 0 to angle 0."""
    return Model(ParamCircuit(1, tuple(gates), n_params), "flatten",
                 scaler=FeatureScaler(np.array([0.0]), np.array([2 * np.pi])))


# --- predict --------------------------------------------------------------------------


@pytest.mark.parametrize("n_points", [3, 4])
def test_zero_gate_ansatz_gives_zero(n_points, rng):
    model = make_model("fully_symmetric", n_points, 2, 0)
    model = fit_model(model, rng.normal(size=(10, n_points, 2)))
    assert model.n_qubits % 2 == 0
    assert predict(model, PointCloudSample(np.zeros((n_points, 2))), []) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("theta", [np.pi / 2, 0.3, -1.1])
def test_one_qubit_minus_sine(theta):
    model = one_qubit_model([Gate("RY", (0,), param_slot=0)], 1)
    y = predict(model, PointCloudSample([[0.0]]), [theta])
    assert y == pytest.approx(-np.sin(theta), abs=1e-12)
    if theta == np.pi / 2:
        assert y == pytest.approx(-1.0)


def test_predict_arity():
    model = one_qubit_model([Gate("RY", (0,), param_slot=0)], 1)
    with pytest.raises(ArityError):
        predict(model, PointCloudSample([[0.0]]), [0.1, 0.2])


def test_predict_matches_dense_oracle(rng):
    model = fit_model(make_model("rotational", 3, 2, 1), rng.normal(size=(20, 3, 2)))
    sample = PointCloudSample(rng.normal(size=(3, 2)))
    params = rng.uniform(0, 2 * np.pi, model.n_params)
    full = model.circuit_for(sample)
    psi = circuit_unitary(full, params)[:, 0]
    ref = np.real(np.vdot(psi, pauli({q: "Z" for q in range(6)}, 6) @ psi))
    assert predict(model, sample, params) == pytest.approx(ref, abs=1e-12)
    np.testing.assert_allclose(initial_state_for(model, sample), encode_batch(model.angles(sample.points[None]))[0],
                               atol=1e-12)


def test_predictions_bounded(rng):
    model = fit_model(make_model("baseline", 3, 2, 2), rng.normal(size=(20, 3, 2)))
    y = predict_batch(model, rng.normal(size=(40, 3, 2)), rng.uniform(0, 6, model.n_params))
    assert np.all(np.abs(y) <= 1 + 1e-12)


def test_model_requires_scaler():
    with pytest.raises(ValueError, match="scaler"):
        predict_batch(make_model("rotational", 3, 2, 1), np.zeros((1, 3, 2)), np.zeros(12))


def test_make_model_validation():
    with pytest.raises(ValueError):
        make_model("baseline", 3, 2, 1, preprocessing="euclidean")
    with pytest.raises(ValueError):
        make_model("rotational", 3, 2, 1, preprocessing="flatten")
    with pytest.raises(ValueError):
        Model(ParamCircuit(1, (), 0), "polar")


def test_model_roundtrip(rng):
    model = fit_model(make_model("fully_symmetric", 4, 4, 2, "minkowski", include_self=False),
                      rng.normal(size=(10, 4, 4)))
    back = Model.from_dict(json.loads(json.dumps(model.to_dict())))
    pts = rng.normal(size=(5, 4, 4))
    np.testing.assert_array_equal(predict_batch(back, pts, np.ones(4)), predict_batch(model, pts, np.ones(4)))


# --- losses -----------------------------------------------------------------------------


@pytest.mark.parametrize("pred, labels, expected", [
    ([1, -1, 1], [1, -1, 1], 0.0),
    ([-1, 1, -1], [1, -1, 1], 1.0),
    ([0, 0], [1, -1], 0.25),
])
def test_mse_examples(pred, labels, expected):
    assert mse_loss(pred, labels) == pytest.approx(expected)


@given(st.lists(st.tuples(st.floats(-1, 1), st.sampled_from([-1, 1])), min_size=1, max_size=30))
def test_mse_bounds(pairs):
    p, y = zip(*pairs)
    assert 0.0 <= mse_loss(p, y) <= 1.0


def test_loss_length_mismatch():
    with pytest.raises(ValueError):
        mse_loss([0.1, 0.2], [1])
    with pytest.raises(ValueError):
        offset_loss([0.1], [1, -1], 0.0)


@pytest.mark.parametrize("pred, labels, b, expected", [
    ([0.3], [1], 0.3, 1.0),
    ([0.7], [-1], -0.3, 0.0),
    ([0.5], [-1], -0.5, 0.0),
    ([0.5, 0.0], [1, -1], 0.0, (-0.5 - 1) ** 2 + 1.0),
])
def test_offset_examples(pred, labels, b, expected):
    assert offset_loss(pred, labels, b) == pytest.approx(expected)


@given(st.lists(st.tuples(st.floats(-1, 1), st.sampled_from([-1, 1])), min_size=1, max_size=20),
       st.floats(-1, 1))
def test_offset_grad_b_matches_finite_difference(pairs, b):
    p, y = map(np.asarray, zip(*pairs))
    if np.min(np.abs(p - b)) <= 1e-4:
        return
    h = 1e-7
    fd = (offset_loss(p, y, b + h) - offset_loss(p, y, b - h)) / (2 * h)
    g = offset_loss_grad_b(p, y, b)
    assert g == pytest.approx(fd, abs=1e-5)
    if abs(fd) > 1e-5:
        assert np.sign(g) == np.sign(fd)


def test_decision_scores_offset(rng):
    model = one_qubit_model([Gate("RY", (0,), param_slot=0)], 1)
    pts = np.zeros((2, 1, 1))
    np.testing.assert_allclose(decision_scores(model, pts, [np.pi / 2], offset=0.5), [-1.5, -1.5])
    np.testing.assert_allclose(decision_scores(model, pts, [np.pi / 2]), [-1.0, -1.0])


# --- parameter shift ------------------------------------------------------------------------


def test_shift_single_ry():
    circ = ParamCircuit(1, (Gate("RY", (0,), param_slot=0),), 1)
    g = circuit_shift_gradient(circ, np.array([1.0 + 0j, 0.0]), [0.7], 0)
    assert g == pytest.approx(-np.sin(0.7), abs=1e-12)


def test_shift_unused_slot_is_zero():
    circ = ParamCircuit(1, (Gate("RY", (0,), param_slot=0),), 2)
    assert circuit_shift_gradient(circ, np.array([1.0 + 0j, 0.0]), [0.7, 0.1], 1) == 0.0


def finite_difference(model, sample, params, slot, h=1e-5):
    p, m = np.array(params, float), np.array(params, float)
    p[slot] += h
    m[slot] -= h
    return (predict(model, sample, p) - predict(model, sample, m)) / (2 * h)


def test_shift_shared_slot_parallel_ry(rng):
    model = Model(ParamCircuit(2, (Gate("RY", (0,), param_slot=0), Gate("RY", (1,), param_slot=0)), 1),
                  "flatten", scaler=FeatureScaler(np.zeros(2), np.full(2, 2 * np.pi)))
    for _ in range(5):
        sample = PointCloudSample(rng.uniform(0, 2 * np.pi, (1, 2)))
        theta = rng.uniform(-np.pi, np.pi, 1)
        g = parameter_shift_gradient(model, sample, theta, 0)
        assert g == pytest.approx(finite_difference(model, sample, theta, 0), abs=1e-6)


def test_shift_matches_finite_difference_random():
    rng = np.random.default_rng(2024)
    configs = [("fully_symmetric", 3, 2, 2), ("fully_symmetric", 4, 2, 1), ("rotational", 3, 2, 1),
               ("baseline", 2, 2, 2), ("rotational", 3, 3, 2)]
    models = [(fit_model(make_model(k, n, d, L), rng.normal(size=(16, n, d))), n, d) for k, n, d, L in configs]
    for _ in range(50):
        model, n, d = models[rng.integers(len(models))]
        sample = PointCloudSample(rng.normal(size=(n, d)))
        params = rng.uniform(0, 2 * np.pi, model.n_params)
        slot = int(rng.integers(model.n_params))
        g = parameter_shift_gradient(model, sample, params, slot)
        assert g == pytest.approx(finite_difference(model, sample, params, slot), abs=1e-6)


def test_shift_rejects_bad_slot_and_gate():
    circ = ParamCircuit(1, (Gate("RY", (0,), param_slot=0),), 1)
    with pytest.raises(IndexError):
        circuit_shift_gradient(circ, np.array([1.0 + 0j, 0.0]), [0.1], 3)


# --- training ---------------------------------------------------------------------------------


def toy_problem(n=80, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    labels = np.where(x < 0.5, 1, -1)
    return x.reshape(n, 1, 1), labels


def toy_model(points):
    circ = ParamCircuit(1, (Gate("RZ", (0,), param_slot=0), Gate("RY", (0,), param_slot=1)), 2)
    return fit_model(Model(circ, "flatten"), points)


def test_toy_problem_learns():
    pts, y = toy_problem()
    res = train(toy_model(pts), (pts, y), TrainConfig(max_iterations=100, seed=1))
    assert res.final_loss < 0.1
    assert len(res.loss_history) <= 100


def test_single_iteration_history():
    pts, y = toy_problem(20)
    res = train(toy_model(pts), (pts, y), TrainConfig(max_iterations=1))
    assert len(res.loss_history) == 1 and res.evaluations == 1


def test_training_deterministic_and_monotone(rng):
    pts, y = toy_problem(30)
    model = toy_model(pts)
    a = train(model, (pts, y), TrainConfig(max_iterations=40, seed=5))
    b = train(model, (pts, y), TrainConfig(max_iterations=40, seed=5))
    assert a.to_json() == b.to_json()
    h = np.asarray(a.loss_history)
    assert np.all(np.diff(h) <= 0)
    initial = mse_loss(predict_batch(model, pts, a.initial_params), y)
    assert h[0] == pytest.approx(initial) and h[-1] <= initial
    assert np.all((a.initial_params >= 0) & (a.initial_params < 2 * np.pi))


def test_offset_training_and_monitor():
    pts, y = toy_problem(30)
    model = toy_model(pts)
    cfg = TrainConfig(max_iterations=30, seed=2, use_offset_loss=True, initial_offset=0.0)
    res = train(model, (pts, y), cfg, monitor=(pts, y))
    assert res.best_offset is not None
    assert len(res.best_params) == 2
    assert len(res.monitor_history) == len(res.loss_history)
    # monitor on the training set itself reproduces the best-so-far loss
    np.testing.assert_allclose(res.monitor_history, res.loss_history)
    final = offset_loss(predict_batch(model, pts, res.best_params), y, res.best_offset)
    assert final == pytest.approx(res.final_loss)


def test_train_accepts_sample_list():
    pts, y = toy_problem(10)
    samples = [PointCloudSample(p, int(l)) for p, l in zip(pts, y)]
    res = train(toy_model(pts), samples, TrainConfig(max_iterations=5))
    assert res.evaluations == 5


def test_train_result_roundtrip():
    pts, y = toy_problem(10)
    res = train(toy_model(pts), (pts, y), TrainConfig(max_iterations=8, seed=3))
    back = TrainResult.from_dict(json.loads(res.to_json()))
    assert back.to_dict() == res.to_dict()


@pytest.mark.parametrize("kw", [{"max_iterations": 0}, {"tolerance": 0.0}])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_fully_symmetric_scaler_is_tied(rng):
    model = fit_model(make_model("fully_symmetric", 3, 2, 1), rng.normal(size=(30, 3, 2)))
    assert len(set(model.scaler.lo[:3])) == 1 and len(set(model.scaler.lo[3:])) == 1
    assert isinstance(build_fully_symmetric(3, 1), ParamCircuit)
