"""How big is the noise compared to the gradient as training goes on?

The trace reads true gradients and objectives off the raw data, so it is
NOT private output.  Use it for tuning only.
"""

from dpagd.data import make_synthetic
from dpagd.harness import trace_run
from dpagd.objectives import LossModel
from dpagd.optimizer import OptimizerConfig

data = make_synthetic(n=5000, p=20, seed=3)
rows = trace_run(LossModel("logistic", 1e-4), data, OptimizerConfig(1.0), seed=0,
                 diagnostic=True)

print(f"{'t':>3} {'|grad|':>9} {'|grad+Y|':>9} {'rms(Y)':>9} {'f':>9}")
for r in rows[:15]:
    print(f"{r['t']:>3} {r['grad_norm']:9.5f} {r['noisy_grad_norm']:9.5f} "
          f"{r['noise_rms']:9.5f} {r['objective']:9.5f}")
print(f"... {len(rows)} outer iterations in total")

# escalations show up as drops in the noise column
drops = sum(b["noise_rms"] < a["noise_rms"] for a, b in zip(rows, rows[1:]))
print(f"noise level dropped {drops} times")
