"""Private logistic regression on the bundled synthetic data vs the baselines."""

from dpagd.baselines import majority_train, nonprivate_gd_train
from dpagd.data import bundled_synthetic, kfold_plan, load_and_preprocess, read_schema
from dpagd.objectives import LossModel, accuracy, objective_value
from dpagd.optimizer import OptimizerConfig, dpagd_train
from dpagd.privacy import NoiseSource

csv_path, schema_path = bundled_synthetic()
data = load_and_preprocess(csv_path, "csv", read_schema(schema_path))
print(f"{data.n} rows, {data.dim} features (intercept included)")

plan = kfold_plan(data.n, k=5, seed=0)[0]
train, test = data.subset(plan.train_indices(0)), data.subset(plan.test_indices(0))
model = LossModel("logistic", 1e-4)

print(f"majority     acc {majority_train(train).accuracy(test):.3f}")
ref = nonprivate_gd_train(model, train)
print(f"nonprivate   acc {accuracy(ref.weights, test):.3f}  f {objective_value(model, ref.weights, train):.4f}")

for eps in (0.1, 0.4, 1.6):
    res = dpagd_train(model, train, OptimizerConfig(eps), NoiseSource(1))
    print(f"dpagd eps={eps:<4} acc {accuracy(res.weights, test):.3f}  "
          f"f {objective_value(model, res.weights, train):.4f}  "
          f"{res.iterations} steps, {res.escalations} escalations")

# the last run's budget story
steps = [u["alpha"] for u in res.update_log]
print(f"accepted step sizes ranged {min(steps):.3f} .. {max(steps):.3f}")
print(f"final rho_ng {res.info['rho_ng_final']:.3g}, grid alpha_max {res.info['alpha_max']:.3f}")
