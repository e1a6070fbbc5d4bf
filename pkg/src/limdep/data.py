"""Loading, validating, decomposing and splitting limited-target datasets."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from limdep.errors import (
    CannotStratify,
    EmptyFile,
    InvalidDataset,
    MissingColumn,
    MissingValues,
    NegativeTarget,
    NonNumericTarget,
)

MISSING_TOKENS = ("", "NA")
MAX_SPLIT_ATTEMPTS = 100


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TabularDataset:
    """Feature matrix plus a nonnegative target with at least one zero and one positive value."""

    features: np.ndarray
    target: np.ndarray
    name: str = "dataset"
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        target = np.asarray(self.target, dtype=np.float64).ravel()
        if features.ndim != 2:
            raise InvalidDataset("features must be a 2-d matrix")
        if features.shape[0] != target.shape[0]:
            raise InvalidDataset(
                f"target length {target.shape[0]} != feature rows {features.shape[0]}"
            )
        if not np.all(np.isfinite(target)):
            raise InvalidDataset("target contains non-finite values")
        if np.any(target < 0):
            raise NegativeTarget("target contains negative values")
        if not np.any(target == 0) or not np.any(target > 0):
            raise InvalidDataset(
                "target needs at least one zero and one positive value"
            )
        names = tuple(self.feature_names) or tuple(
            f"x{j}" for j in range(features.shape[1])
        )
        if len(names) != features.shape[1]:
            raise InvalidDataset("feature_names length does not match columns")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "target", _frozen(target))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.target.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows, name: str | None = None) -> "TabularDataset":
        rows = np.asarray(rows)
        return TabularDataset(
            self.features[rows],
            self.target[rows],
            name=name or self.name,
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class ComponentView:
    """Occurrence indicator ``c``, positive amounts ``a`` and their parent rows."""

    c: np.ndarray
    a: np.ndarray
    positive_index: np.ndarray
    zero_share: float

    @property
    def n_rows(self) -> int:
        return self.c.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Rebuild the target ``y = c * a``; exact, no arithmetic involved."""
        y = np.zeros(self.c.shape[0], dtype=np.float64)
        y[self.positive_index] = self.a
        return y


@dataclass(frozen=True)
class SplitIndices:
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int
    attempts: int = field(default=1, compare=False)


def decompose(dataset: TabularDataset) -> ComponentView:
    y = dataset.target
    positive = y > 0
    c = positive.astype(np.int8)
    positive_index = np.flatnonzero(positive)
    return ComponentView(
        c=_frozen(c),
        a=_frozen(y[positive_index]),
        positive_index=_frozen(positive_index),
        zero_share=float(np.count_nonzero(~positive)) / y.shape[0],
    )


def _train_size(n: int, train_fraction: float) -> int:
    # round half up, never leaving a side empty
    size = int(np.floor(train_fraction * n + 0.5))
    return min(max(size, 1), n - 1)


def split(
    dataset: TabularDataset,
    train_fraction: float = 0.8,
    seed: int = 0,
    stratify: bool = False,
) -> SplitIndices:
    """Random train/test partition of the rows.

    Both parts must contain a zero and a positive target. A plain permutation
    is redrawn (from the same seeded stream) up to 100 times before giving up.
    With ``stratify=True`` zeros and positives are permuted separately so both
    parts keep the overall zero share.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = dataset.n_rows
    if n < 10:
        raise InvalidDataset(f"need at least 10 rows to split, got {n}")
    positive = dataset.target > 0
    n_train = _train_size(n, train_fraction)
    rng = np.random.default_rng(seed)

    if stratify:
        train_parts, test_parts = [], []
        for mask in (~positive, positive):
            rows = rng.permutation(np.flatnonzero(mask))
            k = _train_size(rows.shape[0], train_fraction) if rows.shape[0] > 1 else 0
            if k == 0 or k == rows.shape[0]:
                raise CannotStratify("each class needs at least two rows to stratify")
            train_parts.append(rows[:k])
            test_parts.append(rows[k:])
        return SplitIndices(
            train_rows=_frozen(np.sort(np.concatenate(train_parts))),
            test_rows=_frozen(np.sort(np.concatenate(test_parts))),
            seed=seed,
        )

    for attempt in range(1, MAX_SPLIT_ATTEMPTS + 1):
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
        if (
            positive[train].any()
            and (~positive[train]).any()
            and positive[test].any()
            and (~positive[test]).any()
        ):
            return SplitIndices(
                train_rows=_frozen(np.sort(train)),
                test_rows=_frozen(np.sort(test)),
                seed=seed,
                attempts=attempt,
            )
    raise CannotStratify(
        f"no permutation out of {MAX_SPLIT_ATTEMPTS} put zeros and positives in both parts"
    )


def load_csv(
    path: str | os.PathLike,
    target_column: str,
    *,
    drop_columns: tuple[str, ...] | list[str] = (),
    categorical: tuple[str, ...] | list[str] | None = None,
    name: str | None = None,
) -> TabularDataset:
    """Read a header-first UTF-8 CSV into a :class:`TabularDataset`.

    Columns whose every value parses as a number are numeric features; all
    others (plus any listed in ``categorical``) are one-hot encoded with
    categories in lexicographic order. Missing values are rejected.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as exc:
        raise EmptyFile(f"{path} is empty") from exc
    if frame.shape[0] == 0:
        raise EmptyFile(f"{path} has a header but no rows")
    if target_column not in frame.columns:
        raise MissingColumn(f"target column {target_column!r} not in {path}")
    for col in drop_columns:
        if col not in frame.columns:
            raise MissingColumn(f"column {col!r} to drop not in {path}")

    for col in frame.columns:
        values = frame[col].str.strip()
        if values.isin(MISSING_TOKENS).any():
            raise MissingValues(f"column {col!r} has missing values")

    raw_target = frame[target_column].str.strip()
    target = pd.to_numeric(raw_target, errors="coerce")
    if target.isna().any():
        raise NonNumericTarget(f"target column {target_column!r} is not numeric")
    target = target.to_numpy(dtype=np.float64)
    if np.any(target < 0):
        raise NegativeTarget(f"target column {target_column!r} has negative values")

    forced = set(categorical or ())
    blocks: list[np.ndarray] = []
    names: list[str] = []
    for col in frame.columns:
        if col == target_column or col in drop_columns:
            continue
        values = frame[col].str.strip()
        numeric = pd.to_numeric(values, errors="coerce")
        if col not in forced and not numeric.isna().any():
            blocks.append(numeric.to_numpy(dtype=np.float64)[:, None])
            names.append(col)
            continue
        categories = sorted(values.unique())
        onehot = (values.to_numpy()[:, None] == np.asarray(categories)[None, :])
        blocks.append(onehot.astype(np.float64))
        names.extend(f"{col}={cat}" for cat in categories)

    features = np.hstack(blocks) if blocks else np.empty((target.shape[0], 0))
    return TabularDataset(
        features,
        target,
        name=name or os.path.splitext(os.path.basename(path))[0],
        feature_names=tuple(names),
    )
