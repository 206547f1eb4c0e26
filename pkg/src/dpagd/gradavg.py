"""Recycling a rejected noisy gradient instead of discarding it.

A noisy clipped-gradient sum measured at zCDP cost ``rho_old`` is merged
with a fresh measurement at cost ``rho_new - rho_old``, weighted by the
budgets.  The merged estimate has the same variance as a single
measurement at ``rho_new``, so the first measurement is never wasted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameterError
from .privacy import NoiseSource, gaussian_perturb

__all__ = ["NoisyGradient", "grad_average"]


@dataclass
class NoisyGradient:
    """Un-normalized noisy clipped-gradient sum and the budget it embodies."""

    vector: np.ndarray
    rho_spent: float

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)
        if not self.rho_spent > 0:
            raise InvalidParameterError("rho_spent must be > 0")


def grad_average(prev: NoisyGradient, rho_new: float, true_clipped_sum, c_grad: float,
                 rng: NoiseSource) -> NoisyGradient:
    """Refine ``prev`` up to total budget ``rho_new``.

    ``true_clipped_sum`` must be the exact query ``prev`` was a noisy answer
    to.  Only ``rho_new - prev.rho_spent`` is newly spent; charging it is
    the caller's job.
    """
    rho_old = prev.rho_spent
    if not rho_new > rho_old:
        raise InvalidParameterError(
            f"rho_new ({rho_new}) must exceed the budget already spent ({rho_old})"
        )
    delta_rho = rho_new - rho_old
    fresh = gaussian_perturb(true_clipped_sum, c_grad, delta_rho, rng)
    w_old = rho_old / rho_new
    merged = w_old * prev.vector + (1.0 - w_old) * fresh
    return NoisyGradient(merged, rho_new)
