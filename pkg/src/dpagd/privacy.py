"""zCDP accounting, (eps, delta) conversions, noise mechanisms and NoisyMax.

All conversion helpers are pure functions on floats.  The two stateful
objects are :class:`ZcdpLedger`, which tracks the remaining zCDP budget,
and :class:`NoiseSource`, a seeded random stream.  Mechanisms never charge
the ledger themselves; the caller decides what gets deducted and when.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "ApproxDpParams",
    "SensitivityBound",
    "NoiseSource",
    "ZcdpLedger",
    "rho_from_approx_dp",
    "approx_dp_from_rho",
    "rho_of_gaussian",
    "sigma_for_rho",
    "rho_of_pure_eps",
    "classical_gaussian_sigma",
    "advanced_composition",
    "gaussian_perturb",
    "noisy_max",
    "ledger_charge",
]


@dataclass(frozen=True)
class ApproxDpParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise InvalidParameterError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class SensitivityBound:
    l1: float = 0.0
    l2: float = 0.0

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise InvalidParameterError("sensitivities must be nonnegative")


def _check_delta(delta):
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")


def rho_from_approx_dp(eps_tot: float, delta_tot: float) -> float:
    """Largest rho such that rho-zCDP implies (eps_tot, delta_tot)-DP.

    Solves ``rho + 2*sqrt(rho*L) = eps_tot`` with ``L = ln(1/delta_tot)``,
    which is a quadratic in ``sqrt(rho)`` with positive root
    ``sqrt(L + eps_tot) - sqrt(L)``.
    """
    if not eps_tot > 0:
        raise InvalidParameterError(f"eps_tot must be > 0, got {eps_tot}")
    _check_delta(delta_tot)
    log_inv = -math.log(delta_tot)
    # sqrt(L+e) - sqrt(L) rewritten to avoid cancellation when L >> e
    root = eps_tot / (math.sqrt(log_inv + eps_tot) + math.sqrt(log_inv))
    return root * root


def approx_dp_from_rho(rho: float, delta: float) -> float:
    """Epsilon of the (eps, delta)-DP guarantee implied by rho-zCDP."""
    if rho < 0:
        raise InvalidParameterError(f"rho must be >= 0, got {rho}")
    _check_delta(delta)
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def rho_of_gaussian(delta2: float, sigma: float) -> float:
    """zCDP cost of adding N(0, sigma^2) noise to a query with L2 sensitivity delta2."""
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    if delta2 < 0:
        raise InvalidParameterError("sensitivity must be nonnegative")
    return delta2 * delta2 / (2.0 * sigma * sigma)


def sigma_for_rho(delta2: float, rho: float) -> float:
    if not rho > 0:
        raise InvalidParameterError(f"rho must be > 0, got {rho}")
    if delta2 < 0:
        raise InvalidParameterError("sensitivity must be nonnegative")
    return delta2 / math.sqrt(2.0 * rho)


def rho_of_pure_eps(eps: float) -> float:
    """An eps-DP mechanism is (eps^2 / 2)-zCDP."""
    if eps < 0:
        raise InvalidParameterError(f"eps must be >= 0, got {eps}")
    return 0.5 * eps * eps


def classical_gaussian_sigma(delta2: float, eps: float, delta: float) -> float:
    """Minimal sigma of the classical (eps, delta) Gaussian mechanism, eps in (0, 1)."""
    if not 0 < eps < 1:
        raise InvalidParameterError(f"eps must lie in (0, 1), got {eps}")
    _check_delta(delta)
    if delta2 < 0:
        raise InvalidParameterError("sensitivity must be nonnegative")
    return delta2 / eps * math.sqrt(2.0 * math.log(1.25 / delta))


def advanced_composition(eps: float, delta: float, k: int, delta_prime: float) -> ApproxDpParams:
    """k-fold adaptive composition of (eps, delta)-DP mechanisms.

    Returns ``(sqrt(2k ln(1/delta')) eps + k eps (e^eps - 1), k delta + delta')``.
    """
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    if eps < 0 or delta < 0:
        raise InvalidParameterError("eps and delta must be nonnegative")
    _check_delta(delta_prime)
    eps_total = math.sqrt(2.0 * k * math.log(1.0 / delta_prime)) * eps + k * eps * math.expm1(eps)
    delta_total = k * delta + delta_prime
    if delta_total >= 1:
        raise InvalidParameterError(f"composed delta {delta_total} is not below 1")
    return ApproxDpParams(eps_total, delta_total)


class NoiseSource:
    """Seeded pseudo-random stream.  Same seed, same draws.

    Not cryptographically secure.  Single writer: do not share one instance
    between concurrently running trainers.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self.seed = seed.entropy
            self._gen = np.random.Generator(np.random.PCG64(seed))
        else:
            self.seed = int(seed)
            self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, scale, size=None):
        return self._gen.normal(0.0, scale, size)

    def laplace(self, scale, size=None):
        # inverse CDF; u in (-1/2, 1/2), guarding log(0) at the open end
        u = self._gen.random(size) - 0.5
        tail = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(float).tiny)
        return -scale * np.sign(u) * np.log(tail)

    def exponential(self, scale, size=None):
        u = self._gen.random(size)
        return -scale * np.log1p(-u)

    def choice(self, n, size, replace=False):
        return self._gen.choice(n, size=size, replace=replace)

    def permutation(self, n):
        return self._gen.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def gaussian_perturb(vec, delta2: float, rho: float, rng: NoiseSource) -> np.ndarray:
    """Gaussian mechanism at zCDP cost ``rho``.  The caller charges the ledger."""
    sigma = sigma_for_rho(delta2, rho)
    vec = np.asarray(vec, dtype=float)
    return vec + rng.normal(sigma, vec.shape)


def noisy_max(values, delta1: float, eps: float, rng: NoiseSource, monotone: bool = False) -> int:
    """Report-noisy-max: index of the largest noisy value.

    Laplace(delta1/eps) noise per candidate; with ``monotone=True`` one-sided
    exponential noise of the same scale is used instead, which is only valid
    when every score is monotone in the dataset.  Pure eps-DP, i.e.
    (eps^2/2)-zCDP.  Ties go to the lowest index.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise InvalidParameterError("noisy_max needs a nonempty 1-d list of values")
    if not eps > 0:
        raise InvalidParameterError(f"eps must be > 0, got {eps}")
    if delta1 < 0:
        raise InvalidParameterError("sensitivity must be nonnegative")
    if values.size == 1:
        return 0
    scale = delta1 / eps
    if monotone:
        noise = rng.exponential(scale, values.size)
    else:
        noise = rng.laplace(scale, values.size)
    return int(np.argmax(values + noise))


@dataclass
class ZcdpLedger:
    """Remaining zCDP budget with an append-only charge log.

    The balance may go negative; :attr:`exhausted` reports that instead of
    raising, since the optimizer deducts first and checks afterwards.
    """

    rho_initial: float
    rho_remaining: float = field(default=None)
    charge_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.rho_initial < 0:
            raise InvalidParameterError("initial budget must be nonnegative")
        if self.rho_remaining is None:
            self.rho_remaining = float(self.rho_initial)

    def charge(self, rho: float, label: str) -> float:
        if not rho > 0:
            raise InvalidParameterError(f"charge must be > 0, got {rho}")
        rho = float(rho)
        self.charge_log.append((label, rho))
        self.rho_remaining -= rho
        return self.rho_remaining

    @property
    def exhausted(self) -> bool:
        return self.rho_remaining <= 0

    @property
    def total_charged(self) -> float:
        return math.fsum(cost for _, cost in self.charge_log)

    def replay(self) -> float:
        """Remaining budget recomputed by applying the log from scratch."""
        remaining = float(self.rho_initial)
        for _, cost in self.charge_log:
            remaining -= cost
        return remaining

    def to_records(self) -> list[dict]:
        return [{"label": label, "rho": cost} for label, cost in self.charge_log]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_records(cls, rho_initial: float, records) -> "ZcdpLedger":
        ledger = cls(rho_initial)
        for rec in records:
            ledger.charge(rec["rho"], rec["label"])
        return ledger


def ledger_charge(ledger: ZcdpLedger, rho: float, label: str) -> float:
    return ledger.charge(rho, label)
