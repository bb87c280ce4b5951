"""Datasets: CSV ingestion, synthetic blobs, preprocessing, splitting."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

PreprocessMode = Literal["none", "standardize", "minmax"]


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    label_column: str = "target"

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")
        if self.label_column in self.names:
            raise DataError(f"label column {self.label_column!r} is also a feature name")
        if not self.names:
            raise DataError("need at least one feature")

    @property
    def feature_count(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class PreprocessState:
    """Per-column affine transform ``(x - shift) / scale`` plus the observed box.

    For ``standardize`` shift/scale are mean/stddev, for ``minmax`` they are
    min/range. ``mode == "none"`` keeps shift 0 and scale 1.
    """

    mode: PreprocessMode
    shift: np.ndarray
    scale: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.shift) / self.scale

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.shift


def _identity_state(X: np.ndarray) -> PreprocessState:
    d = X.shape[1]
    lo, hi = _observed_box(X)
    return PreprocessState("none", np.zeros(d), np.ones(d), lo, hi)


def _observed_box(X):
    if len(X) == 0:
        d = X.shape[1]
        return np.zeros(d), np.zeros(d)
    return X.min(axis=0), X.max(axis=0)


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    preprocessing: PreprocessState = None  # filled in __post_init__

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int)
        if X.ndim != 2 or X.shape[1] != self.schema.feature_count:
            raise DataError(f"X must have shape (n, {self.schema.feature_count}), got {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError("row count of X and length of y differ")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not np.isfinite(X).all():
            raise DataError("feature values must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.preprocessing is None:
            object.__setattr__(self, "preprocessing", _identity_state(X))

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.schema.feature_count

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.preprocessing.box_lo, self.preprocessing.box_hi

    def subset(self, rows) -> Dataset:
        rows = np.asarray(rows, dtype=int)
        return replace(self, X=self.X[rows], y=self.y[rows])

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(",".join(self.schema.names).encode())
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()[:16]


def load_csv(path, label_column: str = "target") -> Dataset:
    if not os.path.exists(path):
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        li = header.index(label_column)
        names = tuple(h for i, h in enumerate(header) if i != li)
        X, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            feats = []
            for j, cell in enumerate(row):
                if j == li:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {header[j]!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {header[j]!r}: non-finite value")
                feats.append(v)
            lab = row[li].strip()
            try:
                lv = float(lab)
            except ValueError:
                lv = None
            if lv not in (0.0, 1.0):
                raise DataError(f"{path}:{lineno}: label {lab!r} is not 0/1")
            X.append(feats)
            y.append(int(lv))
    X = np.array(X, dtype=float).reshape(len(X), len(names))
    return Dataset(X, np.array(y, dtype=int), FeatureSchema(names, label_column))


def write_csv(ds: Dataset, path) -> None:
    """Write raw (as-stored) values with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.schema.names) + [ds.schema.label_column])
        for row, lab in zip(ds.X, ds.y):
            w.writerow([format(v, ".17g") for v in row] + [str(int(lab))])


def synth_gaussian_blobs(n_per_class: int, dim: int, separation: float, seed: int) -> Dataset:
    """Two unit-variance clusters centred at -separation/2 * 1 (label 0) and +separation/2 * 1 (label 1)."""
    if n_per_class < 1 or dim < 1:
        raise DataError("n_per_class and dim must be positive")
    rng = np.random.default_rng(seed)
    half = separation / 2.0
    X0 = rng.standard_normal((n_per_class, dim)) - half
    X1 = rng.standard_normal((n_per_class, dim)) + half
    X = np.vstack([X0, X1])
    y = np.r_[np.zeros(n_per_class, int), np.ones(n_per_class, int)]
    schema = FeatureSchema(tuple(f"x{i}" for i in range(dim)), "target")
    return Dataset(X, y, schema)


def fit_preprocess(X: np.ndarray, mode: PreprocessMode, names=None) -> PreprocessState:
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    names = names or [f"column {j}" for j in range(d)]
    if mode == "none":
        return _identity_state(X)
    if mode == "standardize":
        shift = X.mean(axis=0)
        scale = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(d)
        for j in range(d):
            if not scale[j] > 0:
                raise DataError(f"column {names[j]!r} has zero variance; cannot standardize")
    elif mode == "minmax":
        shift = X.min(axis=0)
        scale = X.max(axis=0) - shift
        # constant columns map to 0
        scale = np.where(scale > 0, scale, 1.0)
    else:
        raise DataError(f"unknown preprocessing mode {mode!r}")
    Z = (X - shift) / scale
    lo, hi = _observed_box(Z)
    return PreprocessState(mode, shift, scale, lo, hi)


def default_preprocess(ds: Dataset, mode: PreprocessMode = "minmax") -> Dataset:
    """Fit a column transform on ``ds`` and return the transformed copy.

    The transform is fitted on raw values; calling this on an already
    preprocessed dataset is rejected to keep the inverse map well defined.
    """
    if ds.preprocessing.mode != "none":
        raise DataError("dataset is already preprocessed")
    st = fit_preprocess(ds.X, mode, ds.schema.names)
    return Dataset(st.transform(ds.X), ds.y, ds.schema, st)


def apply_preprocess(ds: Dataset, state: PreprocessState) -> Dataset:
    """Transform raw ``ds`` with a state fitted elsewhere (e.g. on a training split)."""
    Z = state.transform(ds.X)
    return Dataset(Z, ds.y, ds.schema, state)


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(ds)
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise DataError(f"test_fraction {test_fraction} on {n} rows leaves an empty split")
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return ds.subset(train_rows), ds.subset(test_rows)


def bootstrap_resample(ds: Dataset, seed: int) -> Dataset:
    n = len(ds)
    if n < 1:
        raise DataError("cannot resample an empty dataset")
    rows = np.random.default_rng(seed).integers(0, n, size=n)
    return ds.subset(rows)
