"""Differentially private adaptive gradient descent (DP-AGD) under zCDP.

Each outer iteration measures a noisy clipped-gradient sum, normalizes it,
and asks NoisyMax which step size on a grid ``{0, ..., alpha_max}`` lowers
the clipped objective most.  Picking step 0 means the direction looked
useless; the gradient budget then grows by ``1 + gamma`` and the old
measurement is refined through gradient averaging rather than thrown away.
Budget is deducted as it is spent, and weights are only updated while the
remaining budget is still positive, so the returned weights are always
safe to release.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidParameterError
from .gradavg import NoisyGradient, grad_average
from .objectives import (
    LabeledDataset,
    LossModel,
    clipped_gradient_sum,
    clipped_loss_sums,
    objective_gradient,
    objective_value,
)
from .privacy import (
    NoiseSource,
    ZcdpLedger,
    gaussian_perturb,
    noisy_max,
    rho_from_approx_dp,
    rho_of_pure_eps,
    sigma_for_rho,
)

__all__ = [
    "StepGridConfig",
    "StepGrid",
    "OptimizerConfig",
    "TrainResult",
    "initial_budgets",
    "update_step_grid",
    "select_step_size",
    "sample_minibatch",
    "dpagd_train",
]


@dataclass
class StepGridConfig:
    m: int = 20
    alpha_max: float = 2.0
    tau: int = 10
    eta: float = 0.1

    def __post_init__(self):
        if self.m < 2:
            raise InvalidParameterError("step grid needs at least two points")
        if not self.alpha_max > 0 or self.tau < 1 or self.eta < 0:
            raise InvalidParameterError("invalid step grid configuration")


class StepGrid:
    """Candidate step sizes, equally spaced on ``[0, alpha_max]``.

    ``history`` holds the step sizes accepted since the last rescale; once it
    has ``tau`` entries the grid is rescaled from them and the window starts
    over.
    """

    def __init__(self, config: StepGridConfig | None = None):
        config = config or StepGridConfig()
        self.m = config.m
        self.alpha_max = float(config.alpha_max)
        self.tau = config.tau
        self.eta = config.eta
        self.history: deque = deque(maxlen=self.tau)
        self.updates = 0

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.m) * (self.alpha_max / (self.m - 1))

    def record(self, alpha: float) -> bool:
        """Log an accepted step; rescale and return True every ``tau`` of them."""
        self.history.append(float(alpha))
        if len(self.history) == self.tau:
            update_step_grid(self)
            return True
        return False


def update_step_grid(grid: StepGrid) -> StepGrid:
    if not grid.history:
        return grid
    grid.alpha_max = (1.0 + grid.eta) * max(grid.history)
    grid.history.clear()
    grid.updates += 1
    return grid


@dataclass
class OptimizerConfig:
    """DP-AGD settings.

    ``budget_scale`` multiplies the total budget and both per-step shares; it
    exists for noiseless-limit testing and must stay 1 for real releases.
    """

    eps_tot: float
    delta_tot: float = 1e-8
    splits: int = 60
    gamma: float = 0.3
    c_grad: float = 3.0
    c_obj: float = 3.0
    grid: StepGridConfig = field(default_factory=StepGridConfig)
    batch_size: Optional[int] = None
    max_wall_iterations: int = 10**6
    monotone_noisy_max: bool = False
    budget_scale: float = 1.0
    diagnostics: bool = False

    def __post_init__(self):
        if isinstance(self.grid, dict):
            self.grid = StepGridConfig(**self.grid)
        if not self.eps_tot > 0:
            raise InvalidParameterError("eps_tot must be > 0")
        if not 0 < self.delta_tot < 1:
            raise InvalidParameterError("delta_tot must lie in (0, 1)")
        if self.splits < 1 or not self.gamma > 0:
            raise InvalidParameterError("splits must be >= 1 and gamma > 0")
        if not (self.c_grad > 0 and self.c_obj > 0):
            raise InvalidParameterError("clipping thresholds must be > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidParameterError("batch_size must be positive")
        if self.max_wall_iterations < 1 or not self.budget_scale > 0:
            raise InvalidParameterError("invalid wall cap or budget scale")


@dataclass
class TrainResult:
    weights: np.ndarray
    iterations: int
    escalations: int
    rho_initial: float
    rho_final: float
    ledger: list
    method: str = "dpagd"
    wall_capped: bool = False
    update_log: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["weights"] = [float(v) for v in self.weights]
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def initial_budgets(eps_tot: float, splits: int) -> tuple[float, float]:
    """Starting (rho_nmax, rho_ng): both eps shares are eps_tot / (2 splits)."""
    if int(splits) != splits or splits < 1:
        raise InvalidParameterError(f"splits must be a positive integer, got {splits}")
    if not eps_tot > 0:
        raise InvalidParameterError("eps_tot must be > 0")
    share = eps_tot / (2.0 * splits)
    rho = rho_of_pure_eps(share)
    return rho, rho


def _candidate_scores(model, w, g_unit, alphas, data, c_obj):
    W = w[None, :] - alphas[:, None] * g_unit[None, :]
    reg = 0.5 * data.n * model.lam * np.einsum("ij,ij->i", W, W)
    return clipped_loss_sums(model, W, data, c_obj) + reg


def select_step_size(model: LossModel, w, g_unit, grid: StepGrid, data: LabeledDataset,
                     c_obj: float, rho_nmax: float, ledger: ZcdpLedger, rng: NoiseSource,
                     monotone: bool = False) -> tuple[int, float]:
    """Charge ``rho_nmax`` and pick a step size with NoisyMin over the grid.

    Scores are clipped loss sums at ``w - alpha * g_unit`` plus the
    regularizer scaled by n, so the L1 sensitivity is ``c_obj``.
    """
    alphas = grid.points
    scores = _candidate_scores(model, np.asarray(w, float), np.asarray(g_unit, float),
                               alphas, data, c_obj)
    ledger.charge(rho_nmax, "noisy_max")
    idx = noisy_max(-scores, c_obj, math.sqrt(2.0 * rho_nmax), rng, monotone=monotone)
    return idx, float(alphas[idx])


def sample_minibatch(data: LabeledDataset, batch_size: int, rng: NoiseSource) -> LabeledDataset:
    """Uniform subset without replacement; rows keep their original order."""
    if int(batch_size) != batch_size or not 1 <= batch_size <= data.n:
        raise InvalidParameterError(f"batch_size must lie in [1, {data.n}], got {batch_size}")
    if batch_size == data.n:
        return data
    idx = np.sort(rng.choice(data.n, int(batch_size), replace=False))
    return data.subset(idx)


def _unit(noisy_sum, w, lam, n):
    d = noisy_sum + n * lam * w
    norm = np.linalg.norm(d)
    return d / norm if norm > 0 else d


def dpagd_train(model: LossModel, data: LabeledDataset, config: OptimizerConfig,
                rng: NoiseSource, w0=None) -> TrainResult:
    """Run DP-AGD until the zCDP budget derived from (eps_tot, delta_tot) is spent.

    With ``config.diagnostics`` set, non-private per-iteration quantities
    (true gradient norm, objective) are recorded in ``result.trace``; those
    values are for analysis only and must not be released.
    """
    cfg = config
    scale = cfg.budget_scale
    rho_total = rho_from_approx_dp(cfg.eps_tot, cfg.delta_tot) * scale
    ledger = ZcdpLedger(rho_total)
    rho_nmax, rho_ng = (r * scale for r in initial_budgets(cfg.eps_tot, cfg.splits))
    grid = StepGrid(cfg.grid)

    w = np.zeros(data.dim) if w0 is None else np.array(w0, dtype=float)
    iterations = escalations = wall = 0
    capped = False
    update_log, objective_history, trace = [], [], []

    while ledger.rho_remaining > 0:
        if wall >= cfg.max_wall_iterations:
            capped = True
            break
        batch = data if cfg.batch_size is None else sample_minibatch(data, cfg.batch_size, rng)
        nb = batch.n
        g = clipped_gradient_sum(model, w, batch, cfg.c_grad)
        noisy = NoisyGradient(gaussian_perturb(g, cfg.c_grad, rho_ng, rng), rho_ng)
        ledger.charge(rho_ng, "noisy_gradient")
        direction = _unit(noisy.vector, w, model.lam, nb)

        if cfg.diagnostics:
            row = {
                "t": iterations,
                "grad_norm": float(np.linalg.norm(objective_gradient(model, w, data))),
                "noisy_grad_norm": float(np.linalg.norm(noisy.vector / nb + model.lam * w)),
                "noise_rms": math.sqrt(data.dim) * sigma_for_rho(cfg.c_grad, rho_ng) / nb,
                "objective": objective_value(model, w, data),
                "rho_ng": rho_ng,
                "alpha_max": grid.alpha_max,
                "direction_norm": float(np.linalg.norm(direction)),
                "accepted_alpha": None,
            }

        while True:
            wall += 1
            idx, alpha = select_step_size(model, w, direction, grid, batch, cfg.c_obj,
                                          rho_nmax, ledger, rng, cfg.monotone_noisy_max)
            if idx > 0:
                if ledger.rho_remaining > 0:
                    if cfg.diagnostics:
                        before, after = _candidate_scores(
                            model, w, direction, np.array([0.0, alpha]), data, cfg.c_obj)
                        row.update(accepted_alpha=alpha, clipped_before=float(before),
                                   clipped_after=float(after))
                    w = w - alpha * direction
                    iterations += 1
                    update_log.append({"iteration": iterations, "alpha": alpha,
                                       "rho_remaining": ledger.rho_remaining})
                    grid.record(alpha)
                    if cfg.diagnostics:
                        objective_history.append(objective_value(model, w, data))
                break
            # everything computed past exhaustion would be discarded anyway
            if ledger.rho_remaining <= 0 or wall >= cfg.max_wall_iterations:
                break
            rho_old = rho_ng
            rho_ng = (1.0 + cfg.gamma) * rho_ng
            noisy = grad_average(noisy, rho_ng, g, cfg.c_grad, rng)
            ledger.charge(rho_ng - rho_old, "grad_average")
            escalations += 1
            direction = _unit(noisy.vector, w, model.lam, nb)
            if cfg.diagnostics:
                row["direction_norm"] = float(np.linalg.norm(direction))

        if cfg.diagnostics:
            trace.append(row)

    return TrainResult(
        weights=w,
        iterations=iterations,
        escalations=escalations,
        rho_initial=rho_total,
        rho_final=ledger.rho_remaining,
        ledger=ledger.to_records(),
        wall_capped=capped,
        update_log=update_log,
        objective_history=objective_history,
        trace=trace,
        info={"rho_ng_final": rho_ng, "rho_nmax": rho_nmax, "alpha_max": grid.alpha_max,
              "noisy_max_calls": wall},
    )
