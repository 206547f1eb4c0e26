"""Dataset ingestion, preprocessing and cross-validation splits.

Categorical columns are one-hot encoded with lexicographically sorted
categories, numeric columns are min-max scaled to [0, 1], labels become
+1 for the declared positive class and -1 otherwise, and an optional
intercept column of ones is appended last.

Schema documents are JSON objects::

    {"label": "income", "positive": ">50K",
     "columns": {"age": "numeric", "workclass": "categorical"}}

Columns missing from ``columns`` are numeric.  For svmlight sources the
schema needs ``positive`` and may give ``n_features``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import DataError, InvalidParameterError
from .objectives import LabeledDataset

__all__ = [
    "RawTable",
    "Preprocessor",
    "FoldPlan",
    "read_schema",
    "load_table",
    "load_and_preprocess",
    "kfold_plan",
    "make_synthetic",
    "write_csv",
    "bundled_synthetic",
]

NUMERIC, CATEGORICAL = "numeric", "categorical"


@dataclass
class RawTable:
    """Parsed but unencoded table.  ``columns`` maps name to numeric or categorical."""

    columns: dict
    values: dict
    labels: np.ndarray
    label_column: str = "label"

    @property
    def n(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "RawTable":
        idx = np.asarray(idx)
        return RawTable(dict(self.columns), {k: v[idx] for k, v in self.values.items()},
                        self.labels[idx], self.label_column)


def read_schema(path) -> dict:
    with open(path) as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict):
        raise DataError(f"schema {path} is not a JSON object")
    return schema


def _parse_float(text, line, what):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"cannot parse {what} {text!r} as a number", line) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite {what} {text!r}", line)
    return value


def _read_csv(path, schema):
    label_col = schema.get("label", "label")
    kinds = schema.get("columns", {})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty", 1) from None
        if label_col not in header:
            raise DataError(f"label column {label_col!r} missing from header", 1)
        for name, kind in kinds.items():
            if kind not in (NUMERIC, CATEGORICAL):
                raise DataError(f"column {name!r} has unknown kind {kind!r}")
            if name not in header:
                raise DataError(f"schema column {name!r} missing from header", 1)
        feature_cols = [h for h in header if h != label_col]
        columns = {h: kinds.get(h, NUMERIC) for h in feature_cols}
        cols = {h: [] for h in feature_cols}
        labels = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, found {len(row)}", line)
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell == "" or cell == "?":
                    raise DataError(f"missing value in column {name!r}", line)
                if name == label_col:
                    labels.append(cell)
                elif columns[name] == NUMERIC:
                    cols[name].append(_parse_float(cell, line, f"value of {name!r}"))
                else:
                    cols[name].append(cell)
    if not labels:
        raise DataError(f"{path} contains no data rows")
    values = {h: np.array(v, dtype=float if columns[h] == NUMERIC else object)
              for h, v in cols.items()}
    return RawTable(columns, values, np.array(labels, dtype=object), label_col)


def _read_svmlight(path, schema):
    n_features = schema.get("n_features")
    labels, entries = [], []
    max_idx = 0
    with open(path) as fh:
        for line_no, text in enumerate(fh, start=1):
            text = text.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            labels.append(parts[0])
            _parse_float(parts[0], line_no, "label")
            row = {}
            for tok in parts[1:]:
                idx_text, sep, val_text = tok.partition(":")
                if not sep or not idx_text.isdigit() or int(idx_text) < 1:
                    raise DataError(f"malformed feature token {tok!r}", line_no)
                idx = int(idx_text)
                if n_features is not None and idx > n_features:
                    raise DataError(f"feature index {idx} exceeds n_features={n_features}", line_no)
                row[idx] = _parse_float(val_text, line_no, f"feature {idx}")
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not labels:
        raise DataError(f"{path} contains no data rows")
    p = n_features if n_features is not None else max_idx
    dense = np.zeros((len(entries), p))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            dense[i, idx - 1] = val
    names = [f"f{j + 1}" for j in range(p)]
    return RawTable({nm: NUMERIC for nm in names},
                    {nm: dense[:, j] for j, nm in enumerate(names)},
                    np.array(labels, dtype=object), "label")


def load_table(source, fmt: str = "csv", schema: dict | None = None) -> RawTable:
    schema = schema or {}
    if fmt == "csv":
        return _read_csv(source, schema)
    if fmt == "svmlight":
        return _read_svmlight(source, schema)
    raise InvalidParameterError(f"unknown format {fmt!r}")


def _labels_equal(raw, positive):
    try:
        return float(raw) == float(positive)
    except (TypeError, ValueError):
        return str(raw) == str(positive)


@dataclass
class Preprocessor:
    """Encoding statistics learned from one table and applied to others.

    Unseen categories encode as an all-zero block.
    """

    positive: object = 1
    add_intercept: bool = True
    normalize_rows: bool = False
    columns: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)
    mins: dict = field(default_factory=dict)
    maxs: dict = field(default_factory=dict)

    def fit(self, table: RawTable) -> "Preprocessor":
        self.columns = dict(table.columns)
        for name, kind in table.columns.items():
            col = table.values[name]
            if kind == CATEGORICAL:
                self.categories[name] = sorted({str(v) for v in col})
            else:
                self.mins[name] = float(col.min())
                self.maxs[name] = float(col.max())
        return self

    def feature_names(self) -> list[str]:
        names = []
        for name, kind in self.columns.items():
            if kind == CATEGORICAL:
                names.extend(f"{name}={c}" for c in self.categories[name])
            else:
                names.append(name)
        if self.add_intercept:
            names.append("intercept")
        return names

    def transform(self, table: RawTable) -> LabeledDataset:
        blocks = []
        for name, kind in self.columns.items():
            col = table.values[name]
            if kind == CATEGORICAL:
                cats = self.categories[name]
                lookup = {c: j for j, c in enumerate(cats)}
                block = np.zeros((table.n, len(cats)))
                for i, v in enumerate(col):
                    j = lookup.get(str(v))
                    if j is not None:
                        block[i, j] = 1.0
                blocks.append(block)
            else:
                lo, hi = self.mins[name], self.maxs[name]
                if hi > lo:
                    scaled = np.clip((col.astype(float) - lo) / (hi - lo), 0.0, 1.0)
                else:
                    scaled = np.zeros(table.n)
                blocks.append(scaled[:, None])
        X = np.hstack(blocks) if blocks else np.zeros((table.n, 0))
        if self.normalize_rows:
            norms = np.linalg.norm(X, axis=1, keepdims=True)
            X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
        if self.add_intercept:
            X = np.hstack([X, np.ones((table.n, 1))])
        y = np.array([1.0 if _labels_equal(v, self.positive) else -1.0 for v in table.labels])
        return LabeledDataset(X, y)


def load_and_preprocess(source, fmt: str = "csv", schema: dict | None = None,
                        add_intercept: bool = True, normalize_rows: bool = False) -> LabeledDataset:
    """Parse ``source`` and encode it with statistics fitted on the whole file."""
    schema = schema or {}
    table = load_table(source, fmt, schema)
    pre = Preprocessor(schema.get("positive", 1), add_intercept, normalize_rows).fit(table)
    data = pre.transform(table)
    if np.unique(data.labels).size < 2:
        raise DataError(f"{source}: all labels belong to one class")
    return data


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray
    repeat_seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def kfold_plan(n: int, k: int = 5, repeats: int = 1, seed: int = 0) -> list[FoldPlan]:
    """One shuffled k-fold partition per repeat; fold sizes differ by at most one."""
    if k < 2 or n < k or repeats < 1:
        raise InvalidParameterError(f"need k >= 2, n >= k, repeats >= 1 (got n={n}, k={k})")
    plans = []
    for r in range(repeats):
        perm = np.random.default_rng([seed, r]).permutation(n)
        assignments = np.empty(n, dtype=int)
        for fold, chunk in enumerate(np.array_split(perm, k)):
            assignments[chunk] = fold
        plans.append(FoldPlan(k, assignments, r))
    return plans


def make_synthetic(n: int = 5000, p: int = 20, noise: float = 0.1, seed: int = 0,
                   add_intercept: bool = True) -> LabeledDataset:
    """Features uniform on [0, 1]^p, labels from a random hyperplane.

    Gaussian noise of relative size ``noise`` is added to the score before
    taking its sign, so labels near the boundary are occasionally flipped.
    """
    gen = np.random.default_rng(seed)
    X = gen.random((n, p))
    w_true = gen.normal(size=p)
    scores = (X - 0.5) @ w_true
    scores += noise * scores.std() * gen.normal(size=n)
    y = np.where(scores >= 0, 1.0, -1.0)
    if add_intercept:
        X = np.hstack([X, np.ones((n, 1))])
    return LabeledDataset(X, y)


def write_csv(path, data: LabeledDataset, names=None, drop_last: bool = False):
    """Write features plus a ``label`` column; ``drop_last`` omits an intercept."""
    X = data.features[:, :-1] if drop_last else data.features
    names = names or [f"f{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["label"])
        for row, label in zip(X, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def bundled_synthetic() -> tuple[Path, Path]:
    """Paths of the bundled synthetic CSV (n=5000, p=20) and its schema."""
    base = resources.files("dpagd") / "datasets"
    return Path(str(base / "synthetic.csv")), Path(str(base / "synthetic.schema.json"))
