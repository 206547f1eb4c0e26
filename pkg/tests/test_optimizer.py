import json
import math
from itertools import combinations

import numpy as np
import pytest
from scipy import stats

from dpagd.data import make_synthetic
from dpagd.exceptions import InvalidParameterError
from dpagd.objectives import (
    LabeledDataset,
    LossModel,
    accuracy,
    clipped_gradient_sum,
    clipped_loss_sum,
)
from dpagd.optimizer import (
    OptimizerConfig,
    StepGrid,
    StepGridConfig,
    dpagd_train,
    initial_budgets,
    sample_minibatch,
    select_step_size,
    update_step_grid,
)
from dpagd.privacy import NoiseSource, ZcdpLedger, rho_from_approx_dp

MODEL = LossModel("logistic", 1e-3)


def test_initial_budgets():
    rho_nmax, rho_ng = initial_budgets(1.0, 60)
    assert rho_nmax == rho_ng == pytest.approx(3.4722222222222222e-05, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        initial_budgets(1.0, 0)
    with pytest.raises(InvalidParameterError):
        initial_budgets(0.0, 10)


def test_grid_points():
    grid = StepGrid(StepGridConfig(m=5, alpha_max=2.0))
    assert np.allclose(grid.points, [0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(InvalidParameterError):
        StepGridConfig(m=1)


def test_grid_update_examples():
    grid = StepGrid(StepGridConfig(m=20, alpha_max=2.0, tau=3, eta=0.1))
    grid.history.extend([0.4, 1.2, 0.8])
    update_step_grid(grid)
    assert grid.alpha_max == pytest.approx(1.32)
    assert not grid.history
    update_step_grid(grid)  # empty history leaves the grid alone
    assert grid.alpha_max == pytest.approx(1.32)


def test_grid_rescales_every_tau_records():
    grid = StepGrid(StepGridConfig(m=10, alpha_max=1.0, tau=4, eta=0.5))
    fired = [grid.record(a) for a in [0.1, 0.2, 0.3, 0.4, 0.5, 0.1]]
    assert fired == [False, False, False, True, False, False]
    assert grid.alpha_max == pytest.approx(0.6)
    assert list(grid.history) == [0.5, 0.1]
    assert grid.points[0] == 0.0 and len(grid.points) == 10


def test_select_step_size_noiseless_limit(small_data):
    w = np.zeros(small_data.dim)
    g = clipped_gradient_sum(MODEL, w, small_data, 3.0)
    direction = g / np.linalg.norm(g)
    grid = StepGrid()
    scores = [clipped_loss_sum(MODEL, w - a * direction, small_data, 3.0)
              + 0.5 * small_data.n * MODEL.lam * np.sum((w - a * direction) ** 2)
              for a in grid.points]
    ledger = ZcdpLedger(1e30)
    idx, alpha = select_step_size(MODEL, w, direction, grid, small_data, 3.0, 1e20, ledger,
                                  NoiseSource(0))
    assert idx == int(np.argmin(scores))
    assert alpha == grid.points[idx]
    assert ledger.to_records() == [{"label": "noisy_max", "rho": 1e20}]


def test_minibatch_is_uniform():
    data = LabeledDataset(np.arange(10.0)[:, None], np.ones(10))
    rng = NoiseSource(3)
    pairs = {c: i for i, c in enumerate(combinations(range(10), 2))}
    counts = np.zeros(len(pairs))
    for _ in range(9000):
        batch = sample_minibatch(data, 2, rng)
        vals = batch.features[:, 0]
        assert vals[0] < vals[1]
        counts[pairs[tuple(int(v) for v in vals)]] += 1
    assert len(pairs) == 45
    assert stats.chisquare(counts).pvalue > 0.01
    assert sample_minibatch(data, 10, rng) is data
    with pytest.raises(InvalidParameterError):
        sample_minibatch(data, 11, rng)


def test_budget_exhausted_before_first_update_returns_start():
    data = make_synthetic(200, 3, seed=1)
    w0 = np.full(data.dim, 0.25)
    # a single split asks for more than the whole budget on the first gradient
    res = dpagd_train(MODEL, data, OptimizerConfig(1.0, splits=1), NoiseSource(0), w0=w0)
    assert np.array_equal(res.weights, w0)
    assert res.iterations == 0
    assert res.rho_final < 0


def test_deterministic_given_seed(small_data):
    cfg = OptimizerConfig(0.5)
    a = dpagd_train(MODEL, small_data, cfg, NoiseSource(42))
    b = dpagd_train(MODEL, small_data, cfg, NoiseSource(42))
    c = dpagd_train(MODEL, small_data, cfg, NoiseSource(43))
    assert np.array_equal(a.weights, b.weights) and a.ledger == b.ledger
    assert not np.array_equal(a.weights, c.weights)


def test_directions_are_unit_vectors(small_data):
    res = dpagd_train(MODEL, small_data, OptimizerConfig(0.5, diagnostics=True), NoiseSource(1))
    assert res.trace
    for row in res.trace:
        assert row["direction_norm"] == pytest.approx(1.0, abs=1e-12)


def test_escalations_grow_geometrically(small_data):
    cfg = OptimizerConfig(0.2, gamma=0.3)
    res = dpagd_train(MODEL, small_data, cfg, NoiseSource(5))
    assert res.escalations > 0
    rho0 = initial_budgets(0.2, 60)[1]
    rho = None
    for rec in res.ledger:
        if rec["label"] == "noisy_gradient":
            rho = rho if rho is not None else rho0
            assert rec["rho"] == pytest.approx(rho, rel=1e-12)
        elif rec["label"] == "grad_average":
            assert rec["rho"] == pytest.approx(0.3 * rho, rel=1e-12)
            rho *= 1.3
        else:
            assert rec["label"] == "noisy_max"
            assert rec["rho"] == pytest.approx(initial_budgets(0.2, 60)[0])
    assert res.info["rho_ng_final"] == pytest.approx(rho)


def test_every_update_is_paid_for(small_data):
    for seed in range(10):
        res = dpagd_train(MODEL, small_data, OptimizerConfig(0.3), NoiseSource(seed))
        assert all(u["rho_remaining"] > 0 for u in res.update_log)
        assert res.rho_final <= 0
        spent = math.fsum(r["rho"] for r in res.ledger)
        assert res.rho_initial == pytest.approx(rho_from_approx_dp(0.3, 1e-8))
        assert res.rho_initial - spent == pytest.approx(res.rho_final, abs=1e-15)


def test_wall_cap_stops_early(small_data):
    res = dpagd_train(MODEL, small_data, OptimizerConfig(5.0, max_wall_iterations=3),
                      NoiseSource(0))
    assert res.wall_capped
    assert res.info["noisy_max_calls"] == 3


def test_minibatch_mode_runs(small_data):
    res = dpagd_train(MODEL, small_data, OptimizerConfig(1.0, batch_size=50), NoiseSource(0))
    assert res.iterations >= 1
    assert np.all(np.isfinite(res.weights))


def test_separable_2d_utility():
    gen = np.random.default_rng(0)
    X = gen.uniform(-1, 1, size=(2000, 2))
    keep = np.abs(X[:, 0] + X[:, 1]) > 0.2
    X = X[keep]
    y = np.where(X[:, 0] + X[:, 1] > 0, 1.0, -1.0)
    data = LabeledDataset(X, y)
    res = dpagd_train(LossModel("logistic", 1e-4), data, OptimizerConfig(1.0), NoiseSource(0))
    assert accuracy(res.weights, data) > 0.95


def test_result_serializes(small_data):
    res = dpagd_train(MODEL, small_data, OptimizerConfig(0.5), NoiseSource(0))
    doc = json.loads(res.to_json())
    assert doc["method"] == "dpagd" and len(doc["weights"]) == small_data.dim
