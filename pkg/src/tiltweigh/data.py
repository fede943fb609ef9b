"""Datasets, splits, and flat-file ingestion.

Interchange formats
-------------------
Labeled CSV: UTF-8, comma separated, mandatory header ``y,g,x0,...,x{p-1}``.
The ``g`` column is optional; when present its cells may all be empty (then
the dataset has no group annotations). Floats are written with 17 significant
digits so a save/load round trip is bit exact.

Labeled JSON: ``{"features": [[...]], "labels": [...], "groups": [...]|null}``.

Unlabeled CSV: header ``x0,...,x{p-1}`` only.

All dataset types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSplit, InsufficientTarget, SchemaError
from .numerics import substream

FLOAT_FMT = "%.17g"


def _freeze(arr):
    arr.flags.writeable = False
    return arr


def _check_features(features):
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise SchemaError(f"features must be a 2-D matrix, got ndim={features.ndim}")
    if not np.all(np.isfinite(features)):
        raise SchemaError("features contain non-finite values")
    return features


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with integer class labels and optional group annotations."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray | None = None
    class_count: int = 0  # 0 means infer as max(label) + 1

    def __post_init__(self):
        features = _check_features(self.features)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise SchemaError("labels must be a vector matching the feature rows")
        if labels.size == 0:
            raise SchemaError("dataset is empty")
        if labels.min() < 0:
            raise SchemaError("labels must be non-negative")
        k = self.class_count if self.class_count else int(labels.max()) + 1
        if k < 2:
            k = 2  # a one-class file still describes a binary problem space
        if k < int(labels.max()) + 1:
            raise SchemaError(
                f"class_count={k} is smaller than max(label)+1={int(labels.max()) + 1}"
            )
        groups = self.groups
        if groups is not None:
            groups = np.ascontiguousarray(groups, dtype=np.int64)
            if groups.shape != labels.shape:
                raise SchemaError("groups must match the label vector length")
            if groups.min() < 0:
                raise SchemaError("groups must be non-negative")
            _freeze(groups)
        object.__setattr__(self, "features", _freeze(features))
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "class_count", k)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def take(self, idx):
        """New dataset restricted to the given row indices (order kept)."""
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            self.features[idx],
            self.labels[idx],
            None if self.groups is None else self.groups[idx],
            self.class_count,
        )


@dataclass(frozen=True)
class UnlabeledDataset:
    """Feature matrix only; the target sample."""

    features: np.ndarray

    def __post_init__(self):
        features = _check_features(self.features)
        if features.shape[0] == 0:
            raise SchemaError("dataset is empty")
        object.__setattr__(self, "features", _freeze(features))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class SufficientStatistic:
    """Feature map the tilt acts through: identity or a fixed affine map."""

    kind: str = "identity"  # "identity" | "affine"
    projection: np.ndarray | None = None  # (d, p)
    offset: np.ndarray | None = None  # (d,)

    def __post_init__(self):
        if self.kind not in ("identity", "affine"):
            raise SchemaError(f"unknown sufficient statistic kind {self.kind!r}")
        if self.kind == "affine":
            if self.projection is None:
                raise SchemaError("affine statistic requires a projection matrix")
            proj = np.ascontiguousarray(self.projection, dtype=np.float64)
            if proj.ndim != 2 or not np.all(np.isfinite(proj)):
                raise SchemaError("projection must be a finite 2-D matrix")
            off = self.offset
            off = np.zeros(proj.shape[0]) if off is None else np.ascontiguousarray(off, dtype=np.float64)
            if off.shape != (proj.shape[0],) or not np.all(np.isfinite(off)):
                raise SchemaError("offset must be a finite vector matching the projection rows")
            object.__setattr__(self, "projection", _freeze(proj))
            object.__setattr__(self, "offset", _freeze(off))

    def apply(self, x):
        """Map features (n, p) to statistics (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x
        return x @ self.projection.T + self.offset

    def out_dim(self, p):
        return p if self.kind == "identity" else self.projection.shape[0]

    def to_json(self):
        if self.kind == "identity":
            return {"kind": "identity"}
        return {
            "kind": "affine",
            "projection": self.projection.tolist(),
            "offset": self.offset.tolist(),
        }

    @staticmethod
    def from_json(obj):
        if obj["kind"] == "identity":
            return SufficientStatistic()
        return SufficientStatistic(
            "affine",
            np.asarray(obj["projection"], dtype=np.float64),
            np.asarray(obj["offset"], dtype=np.float64),
        )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic random partition: round(fraction*n) rows vs the rest."""

    fraction: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.fraction < 1.0):
            raise SchemaError(f"split fraction must lie in (0,1), got {self.fraction}")


def _parse_float(cell, where):
    try:
        value = float(cell)
    except ValueError as exc:
        raise SchemaError(f"{where}: cannot parse {cell!r} as a float") from exc
    if not np.isfinite(value):
        raise SchemaError(f"{where}: non-finite value {cell!r}")
    return value


def load_labeled(path, fmt=None, class_count=0):
    """Read a labeled dataset from CSV or JSON.

    fmt defaults by extension (".json" vs anything else = CSV). class_count=0
    infers K as max(label)+1.
    """
    path = str(path)
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "csv"
    fmt = fmt.lower()
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        for key in ("features", "labels"):
            if key not in obj:
                raise SchemaError(f"JSON dataset missing key {key!r}")
        feats = obj["features"]
        lengths = {len(row) for row in feats}
        if len(lengths) > 1:
            raise SchemaError("ragged feature rows in JSON dataset")
        return LabeledDataset(
            np.asarray(feats, dtype=np.float64).reshape(len(feats), -1),
            np.asarray(obj["labels"]),
            None if obj.get("groups") is None else np.asarray(obj["groups"]),
            class_count,
        )
    if fmt != "csv":
        raise SchemaError(f"unknown format {fmt!r}")

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        has_groups = len(header) > 1 and header[1] == "g"
        x_start = 2 if has_groups else 1
        if header[0] != "y" or any(
            h != f"x{i}" for i, h in enumerate(header[x_start:])
        ):
            raise SchemaError(f"{path}: bad header {header!r}")
        p = len(header) - x_start
        labels, groups, rows = [], [], []
        group_cells_empty = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: ragged row")
            where = f"{path}:{lineno}"
            try:
                y = int(row[0])
            except ValueError as exc:
                raise SchemaError(f"{where}: bad label {row[0]!r}") from exc
            if y < 0:
                raise SchemaError(f"{where}: negative label {y}")
            labels.append(y)
            if has_groups:
                cell = row[1].strip()
                if cell == "":
                    group_cells_empty += 1
                    groups.append(-1)
                else:
                    groups.append(int(cell))
            rows.append([_parse_float(c, where) for c in row[x_start:]])
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    group_arr = None
    if has_groups and group_cells_empty < len(labels):
        if group_cells_empty:
            raise SchemaError(f"{path}: group column is partially empty")
        group_arr = np.asarray(groups)
    return LabeledDataset(
        np.asarray(rows, dtype=np.float64).reshape(len(rows), p),
        np.asarray(labels),
        group_arr,
        class_count,
    )


def save_labeled(ds, path, fmt=None):
    """Write a labeled dataset; floats at 17 significant digits round-trip."""
    path = str(path)
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "csv"
    if fmt == "json":
        obj = {
            "features": [[float(v) for v in row] for row in ds.features],
            "labels": ds.labels.tolist(),
            "groups": None if ds.groups is None else ds.groups.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        cols = ["y"] + (["g"] if ds.groups is not None else []) + [
            f"x{i}" for i in range(ds.dim)
        ]
        fh.write(",".join(cols) + "\n")
        for i in range(ds.n):
            cells = [str(int(ds.labels[i]))]
            if ds.groups is not None:
                cells.append(str(int(ds.groups[i])))
            cells.extend(FLOAT_FMT % v for v in ds.features[i])
            fh.write(",".join(cells) + "\n")


def load_unlabeled(path):
    """Read an unlabeled dataset from a CSV with header x0..x{p-1}."""
    path = str(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if any(h != f"x{i}" for i, h in enumerate(header)):
            raise SchemaError(f"{path}: bad header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: ragged row")
            rows.append([_parse_float(c, f"{path}:{lineno}") for c in row])
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return UnlabeledDataset(np.asarray(rows, dtype=np.float64))


def save_unlabeled(ds, path):
    with open(str(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"x{i}" for i in range(ds.dim)) + "\n")
        for row in ds.features:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def split(ds, spec):
    """Partition rows into (round(fraction*n), rest), seeded and deterministic."""
    n = ds.n
    if n < 2:
        raise DegenerateSplit(f"cannot split {n} rows")
    k = int(np.floor(spec.fraction * n + 0.5))
    if k == 0 or k == n:
        raise DegenerateSplit(
            f"fraction {spec.fraction} of {n} rows leaves an empty part"
        )
    perm = substream(spec.seed, 0xD5).permutation(n)
    first = np.sort(perm[:k])
    second = np.sort(perm[k:])
    return ds.take(first), ds.take(second)


def mix_target_into_source(src, tgt_labeled, pi, seed):
    """Append floor(n_src*pi) target rows, sampled without replacement.

    When the source carries groups the appended rows are flagged with a fresh
    group id (max source group + 1) so they can be identified downstream.
    """
    if not (0.0 <= pi < 1.0):
        raise SchemaError(f"mixing proportion must lie in [0,1), got {pi}")
    if src.dim != tgt_labeled.dim:
        raise SchemaError("source and target dimensions differ")
    m = int(np.floor(src.n * pi))
    if m == 0:
        return src
    if m > tgt_labeled.n:
        raise InsufficientTarget(
            f"need {m} target rows to mix but only {tgt_labeled.n} available"
        )
    idx = substream(seed, 0x317).choice(tgt_labeled.n, size=m, replace=False)
    idx = np.sort(idx)
    features = np.vstack([src.features, tgt_labeled.features[idx]])
    labels = np.concatenate([src.labels, tgt_labeled.labels[idx]])
    groups = None
    if src.groups is not None:
        flag = int(src.groups.max()) + 1
        groups = np.concatenate([src.groups, np.full(m, flag, dtype=np.int64)])
    k = max(src.class_count, int(labels.max()) + 1)
    return LabeledDataset(features, labels, groups, k)
