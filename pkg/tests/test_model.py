import math

import numpy as np
import pytest

from core.dataset import Dataset
from core.errors import DatasetError, LossSpecError, ShapeError
from core.model import (
    BCE,
    ZERO_ONE,
    ModelParams,
    accuracy,
    adam_step,
    batch_gradient,
    example_gradients,
    example_loss,
    example_losses,
    init_adam,
    init_params,
    predict,
    predict_proba,
)


def _data():
    return Dataset(
        features=[[1.0, 0.0], [0.0, 1.0], [2.0, 1.0], [-1.0, 2.0]],
        labels=[1, 0, 1, 0],
        sensitive=[0, 0, 1, 1],
        n_y=2,
        n_z=2,
    )


def test_zero_model_predicts_half_and_class_zero():
    p = init_params(2)
    assert predict_proba(p, np.array([3.0, -1.0])) == 0.5
    assert list(predict(p, np.ones((3, 2)))) == [0, 0, 0]


def test_bce_of_zero_model_is_log_two():
    assert math.isclose(example_loss(init_params(2), np.array([1.0, 2.0]), 1), math.log(2.0), rel_tol=1e-12)


def test_bce_is_finite_for_saturated_predictions():
    p = ModelParams(weights=[1000.0], bias=0.0)
    loss = example_loss(p, np.array([1.0]), 0)
    assert np.isfinite(loss)
    assert loss > 20


def test_zero_one_loss():
    p = ModelParams(weights=[1.0, 0.0], bias=0.0)
    losses = example_losses(p, np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0, 0]), ZERO_ONE)
    assert list(losses) == [1.0, 0.0]


def test_zero_one_has_no_gradient():
    with pytest.raises(LossSpecError):
        batch_gradient(init_params(2), [0], _data(), ZERO_ONE)


def test_batch_gradient_matches_finite_differences():
    d = _data()
    p = ModelParams(weights=[0.3, -0.2], bias=0.1)
    rows = np.array([0, 1, 3, 3])
    g = batch_gradient(p, rows, d)

    def mean_loss(weights, bias):
        q = ModelParams(weights=weights, bias=bias)
        return example_losses(q, d.features[rows], d.labels[rows], BCE).mean()

    h = 1e-6
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        fd = (mean_loss(p.weights + step, p.bias) - mean_loss(p.weights - step, p.bias)) / (2 * h)
        assert abs(fd - g.weights[j]) < 1e-6
    fd_bias = (mean_loss(p.weights, p.bias + h) - mean_loss(p.weights, p.bias - h)) / (2 * h)
    assert abs(fd_bias - float(g.bias)) < 1e-6


def test_batch_gradient_is_mean_of_example_gradients():
    d = _data()
    p = ModelParams(weights=[0.5, 0.5], bias=-0.2)
    gw, gb = example_gradients(p, d.features, d.labels)
    g = batch_gradient(p, np.arange(d.n), d)
    np.testing.assert_allclose(g.weights, gw.mean(axis=0), atol=1e-15)
    assert abs(float(g.bias) - gb.mean()) < 1e-15


def test_empty_batch_raises():
    with pytest.raises(ShapeError):
        batch_gradient(init_params(2), [], _data())


def test_adam_first_step_moves_by_lr_against_gradient_sign():
    p = init_params(2)
    state = init_adam(p, lr=0.01)
    g = ModelParams(weights=[0.4, -2.0], bias=0.0)
    updated, state = adam_step(p, state, g)
    assert state.t == 1
    np.testing.assert_allclose(updated.weights, [-0.01, 0.01], rtol=1e-6)
    assert float(updated.bias) == 0.0


def test_adam_rejects_shape_mismatch():
    p = init_params(2)
    with pytest.raises(ShapeError):
        adam_step(p, init_adam(p), ModelParams(weights=[1.0, 2.0, 3.0], bias=0.0))


def test_adam_zero_gradient_is_a_no_op():
    p = ModelParams(weights=[1.0, -1.0], bias=0.5)
    updated, _ = adam_step(p, init_adam(p), init_params(2))
    np.testing.assert_array_equal(updated.weights, p.weights)


def test_accuracy():
    p = ModelParams(weights=[1.0, -1.0], bias=0.0)
    assert accuracy(p, _data()) == 1.0


def test_accuracy_of_empty_dataset_raises():
    empty = Dataset(features=np.zeros((0, 2)), labels=[], sensitive=[], n_y=2, n_z=2)
    with pytest.raises(DatasetError):
        accuracy(init_params(2), empty)


def test_multiclass_softmax_and_argmax_ties():
    p = init_params(2, n_y=3)
    assert p.multiclass
    proba = predict_proba(p, np.array([1.0, 1.0]))
    np.testing.assert_allclose(proba, [1 / 3] * 3)
    assert list(predict(p, np.ones((2, 2)))) == [0, 0]


def test_multiclass_gradient_shape():
    d = Dataset(features=[[1.0], [2.0], [3.0]], labels=[0, 1, 2], sensitive=[0, 1, 0], n_y=3, n_z=2)
    p = init_params(1, n_y=3)
    g = batch_gradient(p, [0, 1, 2], d)
    assert g.weights.shape == (3, 1)
    assert g.bias.shape == (3,)
    # softmax gradients sum to zero across classes
    assert abs(float(g.bias.sum())) < 1e-12


def test_params_dict_round_trip():
    p = ModelParams(weights=[0.1, 0.2], bias=-0.3)
    q = ModelParams.from_dict(p.to_dict())
    assert q.same_shape(p)
    np.testing.assert_array_equal(q.weights, p.weights)
    assert p.to_dict()["k"] == 2


def test_params_reject_non_finite():
    with pytest.raises(ShapeError):
        ModelParams(weights=[np.nan], bias=0.0)
