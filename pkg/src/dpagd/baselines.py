"""Comparison trainers: Majority, non-private gradient descent, SGD-Adv."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .exceptions import InvalidParameterError, TrainerError
from .objectives import (
    LabeledDataset,
    LossModel,
    clipped_gradient_sum,
    objective_gradient,
    objective_value,
)
from .optimizer import TrainResult, sample_minibatch
from .privacy import NoiseSource, advanced_composition, classical_gaussian_sigma

__all__ = [
    "MajorityClassifier",
    "majority_train",
    "gradient_descent",
    "nonprivate_gd_train",
    "SgdAdvConfig",
    "SgdAdvCalibration",
    "amplify_eps",
    "calibrate_sgd_adv",
    "sgd_adv_train",
]


@dataclass(frozen=True)
class MajorityClassifier:
    label: float

    def predict(self, features) -> np.ndarray:
        return np.full(np.atleast_2d(features).shape[0], self.label)

    def accuracy(self, data: LabeledDataset) -> float:
        return float(np.mean(self.predict(data.features) == data.labels))


def majority_train(data: LabeledDataset) -> MajorityClassifier:
    """Always predict the more frequent training label (+1 on ties)."""
    positives = int(np.sum(data.labels > 0))
    return MajorityClassifier(1.0 if 2 * positives >= data.n else -1.0)


def gradient_descent(fun, grad, w0, max_iter: int = 1000, step0: float = 1.0,
                     tol: float = 1e-6, shrink: float = 0.5, armijo: float = 1e-4,
                     patience: int = 10):
    """Full-batch gradient descent with Armijo backtracking.

    Each iteration first tries twice the previously accepted step (``step0``
    on the first).  Stops when the gradient norm drops to ``tol`` or when
    backtracking cannot change f at all.  Returns
    ``(w, history, n_iter)`` where ``history`` holds f at every iterate.
    Raises :class:`TrainerError` if f increases ``patience`` times in a row.
    """
    w = np.array(w0, dtype=float)
    f = fun(w)
    history = [f]
    step = step0
    bad = 0
    for it in range(1, max_iter + 1):
        g = grad(w)
        gg = float(g @ g)
        if math.sqrt(gg) <= tol:
            return w, history, it - 1
        t = step
        for _ in range(60):
            w_new = w - t * g
            f_new = fun(w_new)
            if f_new <= f - armijo * t * gg:
                break
            t *= shrink
        if np.isfinite(f_new) and f_new == f:
            # no representable decrease along -g (converged, or stuck at a hinge kink)
            return w, history, it - 1
        if not np.isfinite(f_new) or f_new > f:
            bad += 1
            if bad >= patience:
                raise TrainerError(
                    f"objective increased on {patience} consecutive steps "
                    f"(iteration {it}, f={f_new}, |grad|={math.sqrt(gg):.3g})"
                )
            continue
        bad = 0
        w, f = w_new, f_new
        history.append(f)
        step = 2.0 * t
    return w, history, max_iter


def nonprivate_gd_train(model: LossModel, data: LabeledDataset, iterations: int = 1000,
                        step0: float = 1.0, tol: float = 1e-6, w0=None) -> TrainResult:
    if iterations < 1:
        raise InvalidParameterError("iterations must be >= 1")
    w0 = np.zeros(data.dim) if w0 is None else w0
    w, history, n_iter = gradient_descent(
        lambda v: objective_value(model, v, data),
        lambda v: objective_gradient(model, v, data),
        w0, iterations, step0, tol,
    )
    return TrainResult(weights=w, iterations=n_iter, escalations=0, rho_initial=None,
                       rho_final=None, ledger=[], method="nonprivate",
                       objective_history=history,
                       info={"grad_norm": float(np.linalg.norm(objective_gradient(model, w, data)))})


@dataclass
class SgdAdvConfig:
    eps_tot: float
    delta_tot: float = 1e-8
    iterations: int = 100
    step_size: float = 0.1
    batch_size: Optional[int] = None
    c_grad: float = 3.0

    def __post_init__(self):
        if not self.eps_tot > 0 or not 0 < self.delta_tot < 1:
            raise InvalidParameterError("need eps_tot > 0 and delta_tot in (0, 1)")
        if self.iterations < 1 or not self.step_size > 0 or not self.c_grad > 0:
            raise InvalidParameterError("iterations, step_size and c_grad must be positive")


@dataclass(frozen=True)
class SgdAdvCalibration:
    eps_step: float
    delta_step: float
    eps_amplified: float
    delta_prime: float
    composed_eps: float
    composed_delta: float
    sampling_ratio: float
    iterations: int


def amplify_eps(eps: float, q: float) -> float:
    """Per-step epsilon after Poisson-style subsampling with ratio ``q``."""
    return math.log1p(q * math.expm1(eps))


def _deamplify(eps_amp: float, q: float) -> float:
    return math.log1p(math.expm1(eps_amp) / q)


def calibrate_sgd_adv(eps_tot: float, delta_tot: float, iterations: int,
                      sampling_ratio: float = 1.0) -> SgdAdvCalibration:
    """Per-step (eps, delta) so that T amplified steps compose to at most eps_tot.

    Half of ``delta_tot`` is the composition slack delta', the other half is
    spread evenly over the T steps.  The Gaussian calibration needs eps < 1,
    so larger solutions are capped just below 1, which only adds noise.
    """
    T = int(iterations)
    q = float(sampling_ratio)
    if T < 1 or not 0 < q <= 1:
        raise InvalidParameterError("need iterations >= 1 and sampling ratio in (0, 1]")
    if not eps_tot > 0 or not 0 < delta_tot < 1:
        raise InvalidParameterError("need eps_tot > 0 and delta_tot in (0, 1)")
    delta_prime = delta_tot / 2.0
    delta_step = delta_tot / (2.0 * T)

    def composed(eps_amp):
        return advanced_composition(eps_amp, delta_step, T, delta_prime).epsilon

    hi = 1.0
    while composed(hi) < eps_tot:
        hi *= 2.0
    eps_amp = brentq(lambda e: composed(e) - eps_tot, 0.0, hi, xtol=1e-15, rtol=1e-14)
    while composed(eps_amp) > eps_tot:
        eps_amp = math.nextafter(eps_amp, 0.0)
    eps_step = _deamplify(eps_amp, q)
    cap = math.nextafter(1.0, 0.0)
    if eps_step >= 1.0:
        eps_step = cap
    # re-derive from the (possibly capped) per-step value actually used
    eps_amp = amplify_eps(eps_step, q)
    while composed(eps_amp) > eps_tot:
        eps_step = math.nextafter(eps_step, 0.0)
        eps_amp = amplify_eps(eps_step, q)
    if not eps_step > 0:
        raise TrainerError(f"no positive per-step epsilon meets eps_tot={eps_tot} over {T} steps")
    total = advanced_composition(eps_amp, delta_step, T, delta_prime)
    return SgdAdvCalibration(eps_step, delta_step, eps_amp, delta_prime,
                             total.epsilon, total.delta, q, T)


def sgd_adv_train(model: LossModel, data: LabeledDataset, config: SgdAdvConfig,
                  rng: NoiseSource) -> TrainResult:
    """Mini-batch SGD with per-step Gaussian noise, accounted by advanced composition."""
    b = config.batch_size or max(1, int(round(math.sqrt(data.n))))
    b = min(b, data.n)
    cal = calibrate_sgd_adv(config.eps_tot, config.delta_tot, config.iterations, b / data.n)
    sigma = classical_gaussian_sigma(config.c_grad, cal.eps_step, cal.delta_step)
    w = np.zeros(data.dim)
    for _ in range(config.iterations):
        batch = sample_minibatch(data, b, rng)
        g = clipped_gradient_sum(model, w, batch, config.c_grad)
        g = g + rng.normal(sigma, g.shape)
        w = w - config.step_size * (g / b + model.lam * w)
    return TrainResult(weights=w, iterations=config.iterations, escalations=0,
                       rho_initial=None, rho_final=None, ledger=[], method="sgd_adv",
                       info={"eps_step": cal.eps_step, "delta_step": cal.delta_step,
                             "eps_total": cal.composed_eps, "delta_total": cal.composed_delta,
                             "sigma": sigma, "batch_size": b})
