"""Repeated k-fold experiments, result files and diagnostic traces."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import SgdAdvConfig, majority_train, nonprivate_gd_train, sgd_adv_train
from .data import Preprocessor, bundled_synthetic, kfold_plan, load_table, read_schema
from .exceptions import InvalidParameterError
from .objectives import LabeledDataset, LossModel, accuracy, objective_value
from .optimizer import OptimizerConfig, dpagd_train
from .privacy import NoiseSource

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "run_experiment",
    "summarize",
    "emit_results",
    "read_rows",
    "read_summary",
    "trace_run",
    "TRACE_COLUMNS",
]

METHODS = ("dpagd", "sgd_adv", "nonprivate", "majority")
PRIVATE_METHODS = ("dpagd", "sgd_adv")
DEFAULT_EPS_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
SUMMARY_COLUMNS = ("method", "dataset", "eps", "acc_mean", "acc_std", "obj_mean", "obj_std",
                   "n_cells")
TRACE_COLUMNS = ("t", "grad_norm", "noisy_grad_norm", "noise_rms", "objective")


@dataclass
class ExperimentSpec:
    """One sweep: every method x eps x repeat x fold.

    ``data`` is a file path, or ``"synthetic"`` for the bundled dataset.
    ``optimizer`` and ``sgd_adv`` hold keyword overrides for
    :class:`OptimizerConfig` and :class:`SgdAdvConfig`.
    """

    data: str = "synthetic"
    format: str = "csv"
    schema: Optional[object] = None
    dataset_name: Optional[str] = None
    model: str = "logistic"
    lam: float = 1e-4
    methods: list = field(default_factory=lambda: ["dpagd"])
    eps_grid: list = field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    delta_tot: float = 1e-8
    repeats: int = 20
    folds: int = 5
    optimizer: dict = field(default_factory=dict)
    sgd_adv: dict = field(default_factory=dict)
    nonprivate_iterations: int = 1000
    add_intercept: bool = True
    scale_per_fold: bool = False
    record_runtime: bool = True
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = [self.methods]
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise InvalidParameterError(f"unknown methods {bad}; choose from {METHODS}")
        if any(m in PRIVATE_METHODS for m in self.methods) and not self.eps_grid:
            raise InvalidParameterError("private methods need a nonempty eps grid")
        if any(not e > 0 for e in self.eps_grid):
            raise InvalidParameterError("eps values must be > 0")
        if self.repeats < 1 or self.folds < 2:
            raise InvalidParameterError("need repeats >= 1 and folds >= 2")
        LossModel(self.model, self.lam)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        if "method" in doc:
            doc["methods"] = doc.pop("method")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidParameterError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            doc = json.load(fh)
        base = Path(path).parent
        for key in ("data", "schema"):
            val = doc.get(key)
            if isinstance(val, str) and val != "synthetic" and not Path(val).is_absolute():
                doc[key] = str(base / val)
        return cls.from_dict(doc)

    @property
    def name(self) -> str:
        return self.dataset_name or Path(str(self.data)).stem


@dataclass
class ResultRow:
    method: str
    dataset: str
    eps: float
    repeat: int
    fold: int
    test_accuracy: float
    final_objective: float
    iterations: int
    rho_final: float
    runtime_seconds: float
    error: str = ""


def _load_raw(spec: ExperimentSpec):
    if spec.data == "synthetic":
        path, schema_path = bundled_synthetic()
        schema = read_schema(schema_path)
    else:
        path = spec.data
        schema = spec.schema
        if isinstance(schema, (str, Path)):
            schema = read_schema(schema)
    schema = schema or {}
    return load_table(path, spec.format, schema), schema


def _encoders(spec, table, full, schema, plan, fold):
    """(train, test) datasets for one cell, honouring ``scale_per_fold``."""
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    assert not np.intersect1d(train_idx, test_idx).size
    if spec.scale_per_fold:
        pre = Preprocessor(schema.get("positive", 1), spec.add_intercept)
        pre.fit(table.subset(train_idx))
        return pre.transform(table.subset(train_idx)), pre.transform(table.subset(test_idx))
    return full.subset(train_idx), full.subset(test_idx)


def _run_cell(method, spec, model, train, test, eps, rng):
    if method == "majority":
        clf = majority_train(train)
        return clf.accuracy(test), math.nan, 0, math.nan
    if method == "nonprivate":
        res = nonprivate_gd_train(model, train, spec.nonprivate_iterations)
        rho_final = math.nan
    elif method == "dpagd":
        cfg = OptimizerConfig(eps, spec.delta_tot, **spec.optimizer)
        res = dpagd_train(model, train, cfg, rng)
        rho_final = res.rho_final
    else:
        cfg = SgdAdvConfig(eps, spec.delta_tot, **spec.sgd_adv)
        res = sgd_adv_train(model, train, cfg, rng)
        rho_final = math.nan
    return (accuracy(res.weights, test), objective_value(model, res.weights, train),
            res.iterations, rho_final)


def run_experiment(spec: ExperimentSpec, table=None, schema=None) -> list[ResultRow]:
    """Train and evaluate every (method, eps, repeat, fold) cell.

    Non-private baselines do not depend on eps; they are trained once per
    (repeat, fold) and the row is repeated for each eps so every method has
    the same row count.  A cell that raises is kept as a row with ``error``
    set and NaN metrics.
    """
    if table is None:
        table, schema = _load_raw(spec)
    schema = schema or {}
    model = LossModel(spec.model, spec.lam)
    eps_grid = list(spec.eps_grid)
    plans = kfold_plan(table.n, spec.folds, spec.repeats, spec.seed)
    full = None
    if not spec.scale_per_fold:
        full = Preprocessor(schema.get("positive", 1), spec.add_intercept).fit(table).transform(table)
    rows = []
    for r, plan in enumerate(plans):
        for fold in range(spec.folds):
            train, test = _encoders(spec, table, full, schema, plan, fold)
            for method in spec.methods:
                cached = None
                for e_idx, eps in enumerate(eps_grid):
                    if cached is not None:
                        rows.append(ResultRow(**{**asdict(cached), "eps": float(eps)}))
                        continue
                    rng = NoiseSource(np.random.SeedSequence([spec.seed, e_idx, r, fold]))
                    start = time.perf_counter()
                    try:
                        acc, obj, iters, rho_final = _run_cell(method, spec, model, train, test,
                                                               eps, rng)
                        err = ""
                    except Exception as exc:  # recorded per cell, sweep continues
                        acc = obj = rho_final = math.nan
                        iters, err = 0, f"{type(exc).__name__}: {exc}"
                    elapsed = time.perf_counter() - start if spec.record_runtime else 0.0
                    row = ResultRow(method, spec.name, float(eps), r, fold, float(acc),
                                    float(obj), int(iters), float(rho_final), elapsed, err)
                    rows.append(row)
                    if method not in PRIVATE_METHODS:
                        cached = row
    rows.sort(key=lambda row: (row.method, row.dataset, row.eps, row.repeat, row.fold))
    return rows


def summarize(rows) -> list[dict]:
    """Mean and sample std of accuracy and objective per (method, dataset, eps)."""
    groups: dict = {}
    for row in rows:
        if row.error:
            continue
        groups.setdefault((row.method, row.dataset, row.eps), []).append(row)
    out = []
    for (method, dataset, eps), members in sorted(groups.items()):
        acc = np.array([m.test_accuracy for m in members])
        obj = np.array([m.final_objective for m in members])
        ddof = 1 if len(members) > 1 else 0
        out.append({
            "method": method, "dataset": dataset, "eps": eps,
            "acc_mean": float(acc.mean()), "acc_std": float(acc.std(ddof=ddof)),
            "obj_mean": float(obj.mean()), "obj_std": float(obj.std(ddof=ddof)),
            "n_cells": len(members),
        })
    return out


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_results(rows, summary_path, rows_path) -> None:
    if not rows:
        raise InvalidParameterError("no result rows to write")
    names = [f.name for f in fields(ResultRow)]
    with open(rows_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_fmt(getattr(row, n)) for n in names])
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for rec in summarize(rows):
            writer.writerow([_fmt(rec[c]) for c in SUMMARY_COLUMNS])


def read_rows(path) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    conv = {"float": float, "int": int, "str": str}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ResultRow(**{k: conv[types[k]](v) for k, v in rec.items()}))
    return out


def read_summary(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rec = dict(rec)
            for key in ("eps", "acc_mean", "acc_std", "obj_mean", "obj_std"):
                rec[key] = float(rec[key])
            rec["n_cells"] = int(rec["n_cells"])
            out.append(rec)
    return out


def trace_run(model: LossModel, data: LabeledDataset, config: OptimizerConfig, seed: int = 0,
              diagnostic: bool = False) -> list[dict]:
    """Per-iteration true vs noisy gradient norms and objective of one DP-AGD run.

    Gradient norms and the noise RMS are on the mean-gradient scale (sums
    divided by n).  These numbers are computed from the raw data and are not
    private, hence the explicit ``diagnostic`` opt-in.
    """
    if not diagnostic:
        raise InvalidParameterError(
            "trace output exposes non-private quantities; pass diagnostic=True to run it"
        )
    cfg = OptimizerConfig(**{**asdict(config), "diagnostics": True})
    result = dpagd_train(model, data, cfg, NoiseSource(seed))
    return [{k: row[k] for k in TRACE_COLUMNS} for row in result.trace]
