"""Turning an (eps, delta) target into a zCDP budget and spending it."""

import math

from dpagd.privacy import (
    ZcdpLedger,
    approx_dp_from_rho,
    rho_from_approx_dp,
    rho_of_gaussian,
    rho_of_pure_eps,
    sigma_for_rho,
)
from dpagd.optimizer import initial_budgets

eps_tot, delta_tot = 1.0, 1e-8
rho = rho_from_approx_dp(eps_tot, delta_tot)
print(f"(eps={eps_tot}, delta={delta_tot}) -> rho = {rho:.6g}")
print(f"check: rho back to eps = {approx_dp_from_rho(rho, delta_tot):.12f}")

# the optimizer starts with two equal per-step shares
rho_nmax, rho_ng = initial_budgets(eps_tot, splits=60)
print(f"per-step shares: rho_nmax = rho_ng = {rho_ng:.6g} (about {rho / (2 * rho_ng):.0f} "
      "gradient + step-size pairs)")

# a noisy gradient with clipping bound 3 at that share
sigma = sigma_for_rho(3.0, rho_ng)
print(f"gradient noise sigma at c_grad=3: {sigma:.2f}")

ledger = ZcdpLedger(rho)
while not ledger.exhausted:
    ledger.charge(rho_of_gaussian(3.0, sigma), "noisy_gradient")
    ledger.charge(rho_of_pure_eps(math.sqrt(2 * rho_nmax)), "noisy_max")
print(f"{len(ledger.charge_log)} charges, remaining {ledger.rho_remaining:.3g}")
print(f"replay agrees: {ledger.replay() == ledger.rho_remaining}")
