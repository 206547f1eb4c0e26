"""A small accuracy-vs-epsilon sweep with repeated 5-fold CV."""

import tempfile
from pathlib import Path

from dpagd.harness import ExperimentSpec, emit_results, read_summary, run_experiment

spec = ExperimentSpec(
    data="synthetic",
    methods=["dpagd", "sgd_adv", "nonprivate", "majority"],
    eps_grid=[0.1, 0.4, 1.6],
    repeats=2,
    folds=5,
    seed=0,
)
rows = run_experiment(spec)

out = Path(tempfile.mkdtemp())
emit_results(rows, out / "summary.csv", out / "rows.csv")
print(f"wrote {len(rows)} rows to {out}")

for rec in read_summary(out / "summary.csv"):
    print(f"{rec['method']:<11} eps={rec['eps']:<4} acc {rec['acc_mean']:.3f} "
          f"+/- {rec['acc_std']:.3f} (n={rec['n_cells']})")
