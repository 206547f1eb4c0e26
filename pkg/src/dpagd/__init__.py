"""Differentially private empirical risk minimization under zCDP.

The main entry point is :func:`dpagd.optimizer.dpagd_train`, gradient
descent whose per-iteration privacy budget adapts to how useful each noisy
gradient turns out to be.
"""

from .baselines import majority_train, nonprivate_gd_train, sgd_adv_train
from .data import load_and_preprocess, make_synthetic
from .exceptions import DataError, DimensionMismatchError, InvalidParameterError, TrainerError
from .objectives import LabeledDataset, LossFamily, LossModel, accuracy, objective_value
from .optimizer import OptimizerConfig, StepGridConfig, TrainResult, dpagd_train
from .harness import ExperimentSpec, run_experiment
from .privacy import NoiseSource, ZcdpLedger, approx_dp_from_rho, rho_from_approx_dp

__version__ = "0.1.0"
