"""Dataset loading, encoding, splitting and standardization.

Every loader takes the raw text of a published UCI file and returns an
immutable :class:`Dataset`. Nothing here touches the network; see
``data/manifest.json`` for the file each dataset name maps to.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when a raw table does not match the expected schema."""


@dataclass(frozen=True)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"{self.name}: X has shape {X.shape} but y has {y.shape[0]} labels")
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{self.name}: {X.shape[1]} columns but {len(self.feature_names)} names")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError(f"{self.name}: labels outside [0, {len(self.class_names)})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, rows: np.ndarray, note: str | None = None) -> "Dataset":
        prov = self.provenance + ((note,) if note else ())
        return replace(self, X=self.X[rows], y=self.y[rows], provenance=prov)

    def select_features(self, names: Sequence[str]) -> "Dataset":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise DataError(f"{self.name}: unknown features {missing}")
        idx = [self.feature_names.index(n) for n in names]
        return replace(
            self,
            X=self.X[:, idx],
            feature_names=tuple(names),
            provenance=self.provenance + (f"select_features {list(names)}",),
        )


@dataclass(frozen=True)
class SplitPolicy:
    kind: str  # random_fraction | last_n_rows | stratified_fraction
    fraction_or_n: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random_fraction", "last_n_rows", "stratified_fraction"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if self.kind.endswith("fraction") and not 0 < self.fraction_or_n < 1:
            raise ValueError("split fraction must lie in (0, 1)")
        if self.kind == "last_n_rows" and (int(self.fraction_or_n) != self.fraction_or_n or self.fraction_or_n < 1):
            raise ValueError("last_n_rows needs a positive integer count")


# ---------------------------------------------------------------------------
# raw table parsing


def _read_table(raw_table: str, header: bool = True) -> tuple[list[str], list[list[str]]]:
    text = raw_table.strip("﻿")
    first = text.split("\n", 1)[0]
    delimiter = ";" if first.count(";") > first.count(",") else ","
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r]
    if not rows:
        raise DataError("empty table")
    if header:
        return [h.strip() for h in rows[0]], rows[1:]
    return [], rows


def _require_columns(name: str, found: Sequence[str], expected: Sequence[str]) -> None:
    if len(found) != len(expected):
        extra = [c for c in found if c not in expected]
        missing = [c for c in expected if c not in found]
        bad = (missing or extra or ["<column count>"])[0]
        raise DataError(f"{name}: schema mismatch at column {bad!r} "
                        f"(expected {len(expected)} columns, found {len(found)})")
    for want, got in zip(expected, found):
        if want != got:
            raise DataError(f"{name}: schema mismatch at column {got!r}, expected {want!r}")


def _to_float(name: str, column: str, values: Sequence[str]) -> np.ndarray:
    out = np.empty(len(values))
    for i, v in enumerate(values):
        v = v.strip()
        if v == "" or v.upper() in ("NA", "NAN", "?"):
            raise DataError(f"{name}: missing value in column {column!r}, row {i}")
        try:
            out[i] = float(v)
        except ValueError:
            raise DataError(f"{name}: non-numeric value {v!r} in column {column!r}, row {i}") from None
    return out


def _drop_constant(X: np.ndarray, names: list[str], prov: list[str]) -> tuple[np.ndarray, list[str]]:
    keep = np.ptp(X, axis=0) > 0
    if not keep.all():
        dropped = [n for n, k in zip(names, keep) if not k]
        prov.append(f"drop_constant_columns {dropped}")
        X = X[:, keep]
        names = [n for n, k in zip(names, keep) if k]
    return X, names


HEART_FAILURE_COLUMNS = [
    "age", "anaemia", "creatinine_phosphokinase", "diabetes", "ejection_fraction",
    "high_blood_pressure", "platelets", "serum_creatinine", "serum_sodium", "sex",
    "smoking", "time", "DEATH_EVENT",
]

BANK_COLUMNS = [
    "age", "job", "marital", "education", "default", "housing", "loan", "contact", "month",
    "day_of_week", "duration", "campaign", "pdays", "previous", "poutcome", "emp.var.rate",
    "cons.price.idx", "cons.conf.idx", "euribor3m", "nr.employed", "y",
]
BANK_CATEGORICAL = ["job", "marital", "education", "default", "housing", "loan", "contact",
                    "month", "day_of_week", "poutcome"]

WINE_COLUMNS = [
    "fixed acidity", "volatile acidity", "citric acid", "residual sugar", "chlorides",
    "free sulfur dioxide", "total sulfur dioxide", "density", "pH", "sulphates", "alcohol",
    "quality",
]

GLASS_COLUMNS = ["Id", "RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "Type"]
# UCI types 1-7 (4 is absent from the file) grouped by manufacturing process.
GLASS_GROUPS = {1: 0, 3: 0, 2: 1, 4: 1, 5: 2, 6: 2, 7: 2}
GLASS_CLASSES = ("float", "non-float", "non-window")


def _load_heart_failure(raw_table: str) -> Dataset:
    header, rows = _read_table(raw_table)
    _require_columns("heart_failure", header, HEART_FAILURE_COLUMNS)
    cols = list(zip(*rows))
    data = {c: _to_float("heart_failure", c, v) for c, v in zip(header, cols)}
    # follow-up time is only known after the outcome, so it cannot be a predictor
    feats = [c for c in HEART_FAILURE_COLUMNS[:-1] if c != "time"]
    X = np.column_stack([data[c] for c in feats])
    y = data["DEATH_EVENT"].astype(int)
    prov = ["load heart_failure", "drop_column time"]
    X, feats = _drop_constant(X, feats, prov)
    return Dataset("heart_failure", X, y, feats, ("survived", "died"), prov)


def _load_bank_marketing(raw_table: str) -> Dataset:
    header, rows = _read_table(raw_table)
    _require_columns("bank_marketing", header, BANK_COLUMNS)
    cols = dict(zip(header, zip(*rows)))
    blocks, names = [], []
    prov = ["load bank_marketing", "drop_column duration"]
    for c in BANK_COLUMNS[:-1]:
        if c == "duration":
            continue
        if c in BANK_CATEGORICAL:
            values = [v.strip() for v in cols[c]]
            if any(v == "" for v in values):
                raise DataError(f"bank_marketing: missing value in column {c!r}")
            block, levels = one_hot_encode(values)
            blocks.append(block)
            names += [f"{c}={lvl}" for lvl in levels]
            prov.append(f"one_hot {c} ({len(levels)} levels)")
        else:
            blocks.append(_to_float("bank_marketing", c, cols[c])[:, None])
            names.append(c)
    X = np.hstack(blocks)
    target = [v.strip() for v in cols["y"]]
    if set(target) - {"yes", "no"}:
        raise DataError("bank_marketing: schema mismatch at column 'y' (expected yes/no)")
    y = np.array([t == "yes" for t in target], dtype=int)
    X, names = _drop_constant(X, names, prov)
    return Dataset("bank_marketing", X, y, names, ("no", "yes"), prov)


def _load_wine_red(raw_table: str) -> Dataset:
    header, rows = _read_table(raw_table)
    _require_columns("wine_quality_red", header, WINE_COLUMNS)
    cols = list(zip(*rows))
    data = np.column_stack([_to_float("wine_quality_red", c, v) for c, v in zip(header, cols)])
    quality = data[:, -1].astype(int)
    keep = quality != 3
    prov = ["load wine_quality_red", f"drop_rows quality==3 ({int((~keep).sum())} rows)"]
    X, quality = data[keep, :-1], quality[keep]
    grades = sorted(set(quality.tolist()))
    y = np.searchsorted(grades, quality)
    prov.append(f"relabel grades {grades} -> 0..{len(grades) - 1}")
    feats = WINE_COLUMNS[:-1]
    X, feats = _drop_constant(X, feats, prov)
    return Dataset("wine_quality_red", X, y, feats, tuple(f"grade {g}" for g in grades), prov)


def _load_glass(raw_table: str) -> Dataset:
    header, rows = _read_table(raw_table, header=False)
    if rows and not _is_number(rows[0][0]):
        header, rows = [h.strip() for h in rows[0]], rows[1:]
        _require_columns("glass", header, GLASS_COLUMNS)
    if any(len(r) != len(GLASS_COLUMNS) for r in rows):
        raise DataError(f"glass: schema mismatch at column count (expected {len(GLASS_COLUMNS)})")
    cols = list(zip(*rows))
    data = {c: _to_float("glass", c, v) for c, v in zip(GLASS_COLUMNS, cols)}
    types = data["Type"].astype(int)
    unknown = set(types.tolist()) - set(GLASS_GROUPS)
    if unknown:
        raise DataError(f"glass: unexpected values {sorted(unknown)} in column 'Type'")
    feats = GLASS_COLUMNS[1:-1]
    X = np.column_stack([data[c] for c in feats])
    y = np.array([GLASS_GROUPS[t] for t in types])
    prov = ["load glass", "drop_column Id", "group types {1,3}->float {2,4}->non-float {5,6,7}->non-window"]
    X, feats = _drop_constant(X, feats, prov)
    return Dataset("glass", X, y, feats, GLASS_CLASSES, prov)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


LOADERS = {
    "heart_failure": _load_heart_failure,
    "bank_marketing": _load_bank_marketing,
    "wine_quality_red": _load_wine_red,
    "glass": _load_glass,
}


def load_dataset(name: str, raw_table: str) -> Dataset:
    """Parse the raw UCI table for ``name`` and apply its preprocessing."""
    try:
        loader = LOADERS[name]
    except KeyError:
        raise DataError(f"unknown dataset {name!r}; known: {sorted(LOADERS)}") from None
    ds = loader(raw_table)
    _check_labels(ds)
    return ds


def _check_labels(ds: Dataset) -> None:
    present = np.bincount(ds.y, minlength=ds.n_classes)
    if (present == 0).any():
        raise DataError(f"{ds.name}: classes {np.flatnonzero(present == 0).tolist()} have no samples")


def read_manifest(data_dir: str | Path) -> dict[str, str]:
    path = Path(data_dir) / "manifest.json"
    return json.loads(path.read_text())


def load_from_dir(name: str, data_dir: str | Path) -> Dataset:
    """Load ``name`` from the file the data directory manifest assigns to it."""
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    if name not in manifest:
        raise DataError(f"dataset {name!r} is not listed in {data_dir / 'manifest.json'}")
    path = data_dir / manifest[name]
    if not path.exists():
        raise FileNotFoundError(
            f"{path} not found; download the UCI file for {name!r} (URLs in README) into {data_dir}")
    return load_dataset(name, path.read_text())


# ---------------------------------------------------------------------------
# encoding, splitting, scaling


def one_hot_encode(column: Sequence) -> tuple[np.ndarray, list]:
    """Indicator matrix with one column per level, levels in sorted order.

    Returns the matrix and the level list; column ``j`` corresponds to
    ``levels[j]``.
    """
    values = list(column)
    levels = sorted(set(values))
    if len(levels) < 2:
        raise DataError(f"one-hot encoding needs at least 2 levels, got {levels}")
    index = {lvl: j for j, lvl in enumerate(levels)}
    out = np.zeros((len(values), len(levels)))
    out[np.arange(len(values)), [index[v] for v in values]] = 1.0
    return out, levels


def split_indices(y: np.ndarray, policy: SplitPolicy) -> tuple[np.ndarray, np.ndarray]:
    n = len(y)
    rng = np.random.default_rng(policy.seed)
    if policy.kind == "last_n_rows":
        k = int(policy.fraction_or_n)
        if k >= n:
            raise ValueError(f"last_n_rows({k}) needs more than {k} rows, got {n}")
        return np.arange(n - k), np.arange(n - k, n)
    if policy.kind == "random_fraction":
        n_test = int(np.floor(policy.fraction_or_n * n + 0.5))
        if not 0 < n_test < n:
            raise ValueError(f"fraction {policy.fraction_or_n} leaves an empty side for n={n}")
        perm = rng.permutation(n)
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    test = []
    for k in np.unique(y):
        members = np.flatnonzero(y == k)
        if len(members) < 2:
            raise ValueError(f"stratified split infeasible: class {k} has {len(members)} sample(s)")
        n_test = min(max(int(np.floor(policy.fraction_or_n * len(members) + 0.5)), 1), len(members) - 1)
        test.append(rng.permutation(members)[:n_test])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def split(dataset: Dataset, policy: SplitPolicy) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(dataset.y, policy)
    note = f"split {policy.kind}({policy.fraction_or_n}, seed={policy.seed})"
    return dataset.subset(train_idx, note + " train"), dataset.subset(test_idx, note + " test")


def kfold(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition of ``range(n)``; validation sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    folds = []
    for val in np.array_split(perm, k):
        val = np.sort(val)
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        folds.append((np.flatnonzero(mask), val))
    return folds


def standardize(train_X: np.ndarray, other_X: np.ndarray | None = None, *, allow_constant: bool = False):
    """Center and scale columns with training statistics (sample std, ddof=1).

    Returns ``(scaled_train, scaled_other, means, stds)``. With
    ``allow_constant`` a zero-variance column is centered and left at zero
    instead of raising; its entry in ``stds`` is set to 1.
    """
    train_X = np.asarray(train_X, dtype=float)
    means = train_X.mean(axis=0)
    stds = train_X.std(axis=0, ddof=1) if train_X.shape[0] > 1 else np.zeros(train_X.shape[1])
    const = ~(stds > 1e-12 * np.maximum(1.0, np.abs(means)))
    if const.any():
        if not allow_constant:
            raise DataError(f"constant column(s) {np.flatnonzero(const).tolist()}; drop them before standardizing")
        stds = np.where(const, 1.0, stds)
    scaled_train = (train_X - means) / stds
    if const.any():
        scaled_train[:, const] = 0.0
    scaled_other = None
    if other_X is not None:
        scaled_other = (np.asarray(other_X, dtype=float) - means) / stds
        if const.any():
            scaled_other[:, const] = 0.0
    return scaled_train, scaled_other, means, stds


# ---------------------------------------------------------------------------
# synthetic data


def class_counts(n: int, fractions: Sequence[float]) -> np.ndarray:
    """Largest-remainder rounding of ``n * fractions``; ties go to the lower class index."""
    f = np.asarray(fractions, dtype=float)
    if f.ndim != 1 or len(f) < 2 or (f <= 0).any() or abs(f.sum() - 1) > 1e-9:
        raise ValueError(f"class fractions must be positive and sum to 1, got {list(fractions)}")
    raw = n * f
    counts = np.floor(raw + 1e-9).astype(int)
    order = sorted(range(len(f)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[: n - counts.sum()]:
        counts[k] += 1
    if (counts == 0).any():
        raise ValueError(f"fractions {list(fractions)} leave an empty class at n={n}")
    return counts


def make_synthetic(n: int, d: int, d_informative: int, class_fractions: Sequence[float], seed: int,
                   *, class_sep: float = 1.0, clusters_per_class: int = 2) -> Dataset:
    """Gaussian-cluster classification data with known informative columns.

    Each class is a mixture of ``clusters_per_class`` Gaussian clusters whose
    centers sit on distinct vertices of a hypercube of half-side
    ``class_sep`` in the informative subspace; each cluster is warped by its
    own random linear map. The remaining ``d - d_informative`` columns are
    independent standard normal noise. Columns are shuffled; the informative
    positions are recorded in the provenance (see :func:`informative_columns`).
    """
    if not 0 < d_informative <= d:
        raise ValueError("need 0 < d_informative <= d")
    counts = class_counts(n, class_fractions)
    K = len(counts)
    n_clusters = K * clusters_per_class
    if d_informative < 64 and n_clusters > 2 ** d_informative:
        raise ValueError("not enough hypercube vertices for the requested clusters")
    rng = np.random.default_rng(seed)

    vertices: set[tuple] = set()
    centers = []
    while len(centers) < n_clusters:
        v = tuple(rng.integers(0, 2, size=d_informative).tolist())
        if v not in vertices:
            vertices.add(v)
            centers.append((2 * np.array(v) - 1) * class_sep)

    X_inf, y = [], []
    for k in range(K):
        sizes = np.full(clusters_per_class, counts[k] // clusters_per_class)
        sizes[: counts[k] % clusters_per_class] += 1
        for c in range(clusters_per_class):
            A = rng.uniform(-1, 1, size=(d_informative, d_informative))
            Z = rng.standard_normal((sizes[c], d_informative)) @ A + centers[k * clusters_per_class + c]
            X_inf.append(Z)
            y += [k] * sizes[c]
    X_inf = np.vstack(X_inf)
    y = np.array(y)
    noise = rng.standard_normal((n, d - d_informative))
    X = np.hstack([X_inf, noise])

    col_perm = rng.permutation(d)
    X = X[:, col_perm]
    informative = np.sort(np.flatnonzero(col_perm < d_informative))
    row_perm = rng.permutation(n)
    X, y = X[row_perm], y[row_perm]

    fr = "-".join(f"{100 * f:g}" for f in class_fractions)
    prov = [
        f"make_synthetic n={n} d={d} d_informative={d_informative} fractions={fr} seed={seed} class_sep={class_sep}",
        "informative_columns=" + ",".join(map(str, informative.tolist())),
    ]
    names = [f"f{j}" for j in range(d)]
    return Dataset(f"synthetic_{fr}", X, y, names, tuple(f"class {k}" for k in range(K)), prov)


def informative_columns(dataset: Dataset) -> np.ndarray:
    for step in dataset.provenance:
        if step.startswith("informative_columns="):
            body = step.split("=", 1)[1]
            return np.array([int(v) for v in body.split(",") if v], dtype=int)
    raise DataError(f"{dataset.name} carries no informative-column record")
