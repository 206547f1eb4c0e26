"""Loss models for regularized logistic regression and linear SVM.

Per-sample losses and gradients exclude the L2 regularizer, which is data
independent; :func:`objective_value` adds it back for reporting.  The
clipped sums are the queries the private optimizer perturbs: each record
moves the gradient sum by at most ``c_grad`` in L2 and the loss sum by at
most ``c_obj``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .exceptions import DimensionMismatchError, InvalidParameterError

__all__ = [
    "LabeledDataset",
    "LossFamily",
    "LossModel",
    "ClipThresholds",
    "per_sample_loss",
    "per_sample_gradient",
    "per_sample_losses",
    "per_sample_gradients",
    "clipped_gradient_sum",
    "clipped_loss_sum",
    "clipped_loss_sums",
    "objective_value",
    "objective_gradient",
    "predict",
    "accuracy",
]


@dataclass
class LabeledDataset:
    """Dense features (rows are observations) with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        n = self.features.shape[0]
        if n < 1:
            raise InvalidParameterError("dataset must contain at least one row")
        if self.labels.shape[0] != n:
            raise DimensionMismatchError(
                f"{n} feature rows but {self.labels.shape[0]} labels"
            )
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise InvalidParameterError("labels must be -1 or +1")
        if not np.all(np.isfinite(self.features)):
            raise InvalidParameterError("features must be finite")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.features[idx], self.labels[idx])


class LossFamily(str, Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"

    @classmethod
    def parse(cls, name):
        aliases = {"logreg": "logistic", "lr": "logistic", "svm": "hinge"}
        return cls(aliases.get(str(name).lower(), str(name).lower()))


@dataclass(frozen=True)
class LossModel:
    family: LossFamily = LossFamily.LOGISTIC
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", LossFamily.parse(self.family))
        if self.lam < 0:
            raise InvalidParameterError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class ClipThresholds:
    c_grad: float = 3.0
    c_obj: float = 3.0

    def __post_init__(self):
        if not (self.c_grad > 0 and self.c_obj > 0):
            raise InvalidParameterError("clipping thresholds must be > 0")


def _margins(w, X, y):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] != X.shape[1]:
        raise DimensionMismatchError(
            f"weights of shape {w.shape} do not match {X.shape[1]} features"
        )
    return y * (X @ w)


def _loss_from_margin(family, z):
    if family is LossFamily.LOGISTIC:
        # ln(1 + e^-z), stable for large |z|
        return np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return np.maximum(1.0 - z, 0.0)


def _dloss_dmargin(family, z):
    if family is LossFamily.LOGISTIC:
        return -expit(-z)
    # zero subgradient at the kink z == 1
    return np.where(z < 1.0, -1.0, 0.0)


def per_sample_losses(model: LossModel, w, data: LabeledDataset) -> np.ndarray:
    return _loss_from_margin(model.family, _margins(w, data.features, data.labels))


def per_sample_gradients(model: LossModel, w, data: LabeledDataset) -> np.ndarray:
    """(n, p) matrix of per-record loss gradients."""
    z = _margins(w, data.features, data.labels)
    coef = _dloss_dmargin(model.family, z) * data.labels
    return coef[:, None] * data.features


def per_sample_loss(model: LossModel, w, x, y) -> float:
    d = LabeledDataset(np.atleast_2d(x), [y])
    return float(per_sample_losses(model, w, d)[0])


def per_sample_gradient(model: LossModel, w, x, y) -> np.ndarray:
    d = LabeledDataset(np.atleast_2d(x), [y])
    return per_sample_gradients(model, w, d)[0]


def clipped_gradient_sum(model: LossModel, w, data: LabeledDataset, c_grad: float) -> np.ndarray:
    """Sum of per-record gradients, each rescaled to L2 norm at most ``c_grad``."""
    if not c_grad > 0:
        raise InvalidParameterError("c_grad must be > 0")
    grads = per_sample_gradients(model, w, data)
    norms = np.linalg.norm(grads, axis=1)
    scale = np.maximum(1.0, norms / c_grad)
    return (grads / scale[:, None]).sum(axis=0)


def clipped_loss_sum(model: LossModel, w, data: LabeledDataset, c_obj: float) -> float:
    """Sum of per-record losses, each capped at ``c_obj``.  Not divided by n."""
    if not c_obj > 0:
        raise InvalidParameterError("c_obj must be > 0")
    return float(np.minimum(per_sample_losses(model, w, data), c_obj).sum())


def clipped_loss_sums(model: LossModel, W, data: LabeledDataset, c_obj: float) -> np.ndarray:
    """:func:`clipped_loss_sum` for every row of the candidate matrix ``W``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[1] != data.dim:
        raise DimensionMismatchError(
            f"candidates have {W.shape[1]} columns, data has {data.dim} features"
        )
    z = data.labels[:, None] * (data.features @ W.T)
    return np.minimum(_loss_from_margin(model.family, z), c_obj).sum(axis=0)


def objective_value(model: LossModel, w, data: LabeledDataset) -> float:
    """Mean unclipped loss plus ``(lam/2) * ||w||^2``."""
    w = np.asarray(w, dtype=float)
    mean_loss = per_sample_losses(model, w, data).mean()
    return float(mean_loss + 0.5 * model.lam * (w @ w))


def objective_gradient(model: LossModel, w, data: LabeledDataset) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return per_sample_gradients(model, w, data).mean(axis=0) + model.lam * w


def predict(w, features) -> np.ndarray:
    """Sign predictions; a zero score maps to +1."""
    scores = np.asarray(features, dtype=float) @ np.asarray(w, dtype=float)
    return np.where(scores >= 0, 1.0, -1.0)


def accuracy(w, data: LabeledDataset) -> float:
    return float(np.mean(predict(w, data.features) == data.labels))
