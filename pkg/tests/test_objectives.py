import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dpagd.exceptions import DimensionMismatchError, InvalidParameterError
from dpagd.objectives import (
    ClipThresholds,
    LabeledDataset,
    LossFamily,
    LossModel,
    accuracy,
    clipped_gradient_sum,
    clipped_loss_sum,
    clipped_loss_sums,
    objective_gradient,
    objective_value,
    per_sample_gradient,
    per_sample_gradients,
    per_sample_loss,
    predict,
)

LOGREG = LossModel("logistic", 0.0)
SVM = LossModel("hinge", 0.0)


def test_family_aliases():
    assert LossModel("logreg").family is LossFamily.LOGISTIC
    assert LossModel("svm").family is LossFamily.HINGE
    with pytest.raises(ValueError):
        LossModel("squared")
    with pytest.raises(InvalidParameterError):
        LossModel("logistic", -1.0)
    with pytest.raises(InvalidParameterError):
        ClipThresholds(0.0, 1.0)


def test_dataset_validation():
    with pytest.raises(InvalidParameterError):
        LabeledDataset([[1.0]], [0])
    with pytest.raises(DimensionMismatchError):
        LabeledDataset([[1.0], [2.0]], [1])
    with pytest.raises(InvalidParameterError):
        LabeledDataset([[np.nan]], [1])


@pytest.mark.parametrize("z, expected", [
    (0.0, math.log(2)),
    (10.0, 4.5398899216864573e-05),
    (-800.0, 800.0),
    (800.0, 0.0),
])
def test_logistic_loss_values(z, expected):
    loss = per_sample_loss(LOGREG, [z], [1.0], 1)
    assert np.isfinite(loss)
    assert loss == pytest.approx(expected, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("z, loss, grad", [
    (0.5, 0.5, -1.0),
    (2.0, 0.0, 0.0),
    (-1.0, 2.0, -1.0),
    (1.0, 0.0, 0.0),
])
def test_hinge_values(z, loss, grad):
    assert per_sample_loss(SVM, [z], [1.0], 1) == pytest.approx(loss)
    assert per_sample_gradient(SVM, [z], [1.0], 1)[0] == pytest.approx(grad)


def test_logistic_gradient_matches_finite_differences():
    gen = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        x, w = gen.normal(size=5), gen.normal(size=5)
        y = gen.choice([-1.0, 1.0])
        g = per_sample_gradient(LOGREG, w, x, y)
        fd = np.array([(per_sample_loss(LOGREG, w + h * e, x, y)
                        - per_sample_loss(LOGREG, w - h * e, x, y)) / (2 * h)
                       for e in np.eye(5)])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


def test_hinge_subgradient_piecewise_rule():
    gen = np.random.default_rng(1)
    checked = 0
    while checked < 100:
        x, w = gen.normal(size=4), gen.normal(size=4)
        y = gen.choice([-1.0, 1.0])
        z = y * (x @ w)
        if abs(z - 1) < 1e-3:
            continue
        expected = -y * x if z < 1 else np.zeros(4)
        assert np.array_equal(per_sample_gradient(SVM, w, x, y), expected)
        checked += 1


def test_objective_gradient_finite_differences(random_data):
    model = LossModel("logistic", 0.3)
    w = np.array([0.2, -0.5, 1.0])
    h = 1e-6
    fd = np.array([(objective_value(model, w + h * e, random_data)
                    - objective_value(model, w - h * e, random_data)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(objective_gradient(model, w, random_data), fd, rtol=1e-6, atol=1e-9)


def test_objective_at_origin_is_ln2(random_data):
    assert objective_value(LossModel("logistic", 5.0), np.zeros(3), random_data) == \
        pytest.approx(math.log(2), abs=1e-15)


def test_gradient_clipping_example():
    # one record with gradient norm 5 under c_grad = 3 rescales to norm 3
    data = LabeledDataset([[3.0, 4.0]], [1])
    g = clipped_gradient_sum(SVM, np.zeros(2), data, 3.0)
    assert np.allclose(g, [-1.8, -2.4])
    assert np.linalg.norm(g) == pytest.approx(3.0)
    assert np.allclose(clipped_gradient_sum(SVM, np.zeros(2), data, 10.0), [-3.0, -4.0])


def test_loss_clipping_mixed_example():
    # hinge losses 0.5, 5.0, 0.0 with c_obj = 3 sum to 3.5
    data = LabeledDataset([[0.5], [-4.0], [2.0]], [1, 1, 1])
    assert clipped_loss_sum(SVM, [1.0], data, 3.0) == pytest.approx(3.5)
    assert clipped_loss_sum(SVM, [1.0], data, 100.0) == pytest.approx(5.5)
    data = LabeledDataset([[0.5], [-3.0], [-1.9]], [1, 1, 1])
    assert clipped_loss_sum(SVM, [1.0], data, 3.0) == pytest.approx(6.4)


def test_clipped_loss_sums_matches_single(random_data):
    W = np.random.default_rng(2).normal(size=(6, 3))
    batch = clipped_loss_sums(LOGREG, W, random_data, 1.0)
    single = [clipped_loss_sum(LOGREG, w, random_data, 1.0) for w in W]
    assert np.allclose(batch, single)
    with pytest.raises(DimensionMismatchError):
        clipped_loss_sums(LOGREG, np.zeros((2, 4)), random_data, 1.0)


def test_clipped_gradient_norm_bound(random_data):
    grads = per_sample_gradients(LOGREG, np.full(3, 4.0), random_data)
    assert grads.shape == (random_data.n, 3)
    g = clipped_gradient_sum(LOGREG, np.full(3, 4.0), random_data, 0.1)
    assert np.linalg.norm(g) <= 0.1 * random_data.n + 1e-12


@settings(max_examples=200, deadline=None)
@given(
    arrays(float, (12, 3), elements=st.floats(-50, 50)),
    st.lists(st.sampled_from([-1.0, 1.0]), min_size=13, max_size=13),
    arrays(float, 3, elements=st.floats(-5, 5)),
    arrays(float, 3, elements=st.floats(-50, 50)),
    st.sampled_from(["logistic", "hinge"]),
)
def test_add_one_sensitivity(X, y, w, extra, family):
    model = LossModel(family)
    small = LabeledDataset(X, y[:12])
    big = LabeledDataset(np.vstack([X, extra]), y)
    dg = clipped_gradient_sum(model, w, big, 3.0) - clipped_gradient_sum(model, w, small, 3.0)
    dl = clipped_loss_sum(model, w, big, 3.0) - clipped_loss_sum(model, w, small, 3.0)
    assert np.linalg.norm(dg) <= 3.0 * (1 + 1e-9)
    assert abs(dl) <= 3.0 * (1 + 1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 3, elements=st.floats(-4, 4)), arrays(float, 3, elements=st.floats(-4, 4)),
       st.floats(0, 1), st.sampled_from(["logistic", "hinge"]))
def test_objective_convex_along_chords(u, v, t, family):
    data = LabeledDataset(np.random.default_rng(3).normal(size=(20, 3)),
                          np.tile([1.0, -1.0], 10))
    model = LossModel(family, 0.1)
    mid = objective_value(model, t * u + (1 - t) * v, data)
    chord = t * objective_value(model, u, data) + (1 - t) * objective_value(model, v, data)
    assert mid <= chord + 1e-9


def test_predict_and_accuracy():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert np.array_equal(predict([1.0, -1.0], X), [1.0, -1.0, 1.0])
    data = LabeledDataset(X, [1, 1, -1])
    assert accuracy([1.0, -1.0], data) == pytest.approx(1 / 3)


def test_weight_dimension_checked(random_data):
    with pytest.raises(DimensionMismatchError):
        objective_value(LOGREG, np.zeros(4), random_data)
