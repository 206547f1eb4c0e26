import math

import numpy as np
import pytest

from dpagd.baselines import (
    SgdAdvConfig,
    amplify_eps,
    calibrate_sgd_adv,
    gradient_descent,
    majority_train,
    nonprivate_gd_train,
    sgd_adv_train,
)
from dpagd.exceptions import InvalidParameterError, TrainerError
from dpagd.objectives import LabeledDataset, LossModel, accuracy, objective_gradient
from dpagd.privacy import NoiseSource, advanced_composition


def _labels(values):
    return LabeledDataset(np.zeros((len(values), 1)), values)


@pytest.mark.parametrize("labels, expected", [
    ([1, 1, -1], 1.0), ([-1, -1, 1], -1.0), ([1, -1], 1.0),
])
def test_majority(labels, expected):
    clf = majority_train(_labels(labels))
    assert clf.label == expected
    assert clf.accuracy(_labels([1, -1, -1, -1])) == (0.25 if expected > 0 else 0.75)


def test_gd_quadratic_single_step():
    # f = ||w||^2 / 2 with step 1 lands on the minimizer in one move
    w, hist, n_iter = gradient_descent(lambda w: 0.5 * w @ w, lambda w: w, [3.0, -4.0])
    assert np.allclose(w, 0.0)
    assert hist[0] == pytest.approx(12.5) and hist[1] == pytest.approx(0.0)
    assert n_iter == 1


def test_gd_raises_on_divergence():
    calls = iter(range(10**6))
    with pytest.raises(TrainerError):
        gradient_descent(lambda w: float(next(calls)), lambda w: np.ones_like(w), [1.0],
                         patience=3)


def test_gd_stops_when_no_step_helps():
    # an ascent "gradient" leaves no representable decrease after backtracking
    w, hist, n_iter = gradient_descent(lambda w: float(w @ w), lambda w: -w, [1.0])
    assert np.array_equal(w, [1.0]) and n_iter == 0 and hist == [1.0]


def test_nonprivate_converges(small_data):
    model = LossModel("logistic", 1e-2)
    res = nonprivate_gd_train(model, small_data, iterations=1000)
    assert np.linalg.norm(objective_gradient(model, res.weights, small_data)) <= 1e-4
    assert all(b <= a for a, b in zip(res.objective_history, res.objective_history[1:]))
    assert res.rho_initial is None and res.method == "nonprivate"
    with pytest.raises(InvalidParameterError):
        nonprivate_gd_train(model, small_data, iterations=0)


def test_nonprivate_svm(small_data):
    res = nonprivate_gd_train(LossModel("hinge", 1e-2), small_data, iterations=300)
    assert accuracy(res.weights, small_data) > 0.85


def test_amplification():
    assert amplify_eps(0.5, 1.0) == pytest.approx(0.5)
    assert amplify_eps(0.5, 0.1) == pytest.approx(math.log(1 + 0.1 * (math.e ** 0.5 - 1)))
    assert amplify_eps(0.5, 0.01) < 0.5 * 0.02


@pytest.mark.parametrize("T", [1, 10, 100, 1000])
@pytest.mark.parametrize("q", [1.0, 0.05])
def test_calibration_never_overspends(T, q):
    cal = calibrate_sgd_adv(1.0, 1e-8, T, q)
    assert 0 < cal.eps_step < 1
    assert cal.eps_amplified == pytest.approx(amplify_eps(cal.eps_step, q), rel=1e-15)
    total = advanced_composition(cal.eps_amplified, cal.delta_step, T, cal.delta_prime)
    assert total.epsilon <= 1.0
    assert cal.delta_step * T + cal.delta_prime == pytest.approx(1e-8)


def test_calibration_tight_when_uncapped():
    cal = calibrate_sgd_adv(1.0, 1e-8, 1, 1.0)
    assert cal.composed_eps == pytest.approx(1.0, rel=1e-12)
    assert cal.eps_step == pytest.approx(0.15738, abs=1e-4)


def test_per_step_eps_shrinks_with_more_steps():
    steps = [calibrate_sgd_adv(1.0, 1e-8, T, 0.05).eps_step for T in (100, 1000, 10000)]
    assert steps[0] >= steps[1] > steps[2]


def test_calibration_errors():
    with pytest.raises(InvalidParameterError):
        calibrate_sgd_adv(1.0, 1e-8, 0)
    with pytest.raises(InvalidParameterError):
        calibrate_sgd_adv(1.0, 1e-8, 10, 0.0)
    with pytest.raises(InvalidParameterError):
        SgdAdvConfig(0.0)


def test_sgd_adv_trains(small_data):
    res = sgd_adv_train(LossModel("logistic", 1e-3), small_data,
                        SgdAdvConfig(1.0, iterations=50), NoiseSource(0))
    assert res.method == "sgd_adv" and res.iterations == 50
    assert res.info["eps_total"] <= 1.0
    assert res.info["batch_size"] == round(math.sqrt(small_data.n))
